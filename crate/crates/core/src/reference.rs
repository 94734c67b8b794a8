//! Standard Schrödinger, Klein-Gordon and Dirac baselines plus analytic catalogs.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, WaveError};
use crate::linalg::ComplexBandSolver;
use crate::numgrid::{laplacian_for, BandedOperator, Discretization, Grid, WaveField};
use crate::potentials::PotentialSpec;
use crate::units::UnitSystem;

/// Eigenpairs with solver diagnostics. `S` is the state type (scalar or spinor).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult<S = WaveField> {
    pub energies: Vec<f64>,
    pub states: Vec<S>,
    pub node_counts: Vec<usize>,
    /// `‖Hψ − Eψ‖` per state (grid norm).
    pub residuals: Vec<f64>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl<S> SpectrumResult<S> {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

/// Snapshots of a time evolution; `frames[0]` is the initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S = WaveField> {
    pub dt: f64,
    pub times: Vec<f64>,
    pub frames: Vec<S>,
    pub norms: Vec<f64>,
}

impl<S> Trajectory<S> {
    pub(crate) fn start(dt: f64, initial: S, norm: f64, steps: usize) -> Self {
        let mut t = Trajectory {
            dt,
            times: Vec::with_capacity(steps + 1),
            frames: Vec::with_capacity(steps + 1),
            norms: Vec::with_capacity(steps + 1),
        };
        t.push(0.0, initial, norm);
        t
    }

    pub(crate) fn push(&mut self, time: f64, frame: S, norm: f64) {
        self.times.push(time);
        self.frames.push(frame);
        self.norms.push(norm);
    }

    pub fn last(&self) -> &S {
        self.frames.last().expect("trajectory holds the initial frame")
    }

    /// Largest `|‖ψ(t)‖ − ‖ψ(0)‖|` relative to the initial norm (absolute if that is zero).
    pub fn max_norm_drift(&self) -> f64 {
        let n0 = self.norms[0];
        let scale = if n0 > 0.0 { n0 } else { 1.0 };
        self.norms.iter().map(|n| (n - n0).abs() / scale).fold(0.0, f64::max)
    }
}

/// Flips an eigenvector so that its first significant entry is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * max) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Applies `-ħ²/2m L + diag(w)` to the field values; wall rows give zero.
pub(crate) fn apply_hamiltonian(lap: &BandedOperator, kinetic: f64, w: &[f64], psi: &[Complex64]) -> Vec<Complex64> {
    let grid = lap.grid();
    let lp = lap.apply_values(psi);
    let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
    for i in grid.active() {
        out[i] = -lp[i] * kinetic + psi[i] * w[i];
    }
    out
}

pub(crate) fn grid_norm(grid: &Grid, values: &[Complex64]) -> f64 {
    grid.quadrature_weights()
        .iter()
        .zip(values)
        .map(|(w, v)| w * v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Lowest eigenpairs of `-ħ²/2m L + diag(w)` on the active nodes.
pub(crate) fn linear_spectrum(
    lap: &BandedOperator,
    kinetic: f64,
    w: &[f64],
    n_states: usize,
) -> Result<SpectrumResult> {
    let grid = *lap.grid();
    let n_active = grid.active().len();
    if n_states == 0 {
        return Err(WaveError::config("n_states must be >= 1"));
    }
    if n_states > n_active {
        return Err(WaveError::config(format!(
            "{n_states} states requested but the grid has {n_active} unknowns"
        )));
    }
    let matrix = lap.restrict(-kinetic, w, vec![1.0; n_active])?;
    let pairs = matrix.lowest(n_states)?;
    collect_spectrum(&grid, lap, kinetic, w, pairs)
}

pub(crate) fn collect_spectrum(
    grid: &Grid,
    lap: &BandedOperator,
    kinetic: f64,
    w: &[f64],
    pairs: Vec<(f64, Vec<f64>)>,
) -> Result<SpectrumResult> {
    let mut out = SpectrumResult {
        energies: Vec::with_capacity(pairs.len()),
        states: Vec::with_capacity(pairs.len()),
        node_counts: Vec::with_capacity(pairs.len()),
        residuals: Vec::with_capacity(pairs.len()),
        diagnostics: BTreeMap::new(),
    };
    for (e, mut v) in pairs {
        fix_sign(&mut v);
        let state = WaveField::from_real(grid, &grid.lift(&v))?.normalized();
        let hpsi = apply_hamiltonian(lap, kinetic, w, &state.values);
        let r: Vec<Complex64> = hpsi.iter().zip(&state.values).map(|(h, p)| h - p * e).collect();
        out.residuals.push(grid_norm(grid, &r));
        out.node_counts.push(state.node_count());
        out.energies.push(e);
        out.states.push(state);
    }
    out.diagnostics.insert(
        "max_residual".into(),
        out.residuals.iter().copied().fold(0.0, f64::max),
    );
    out.diagnostics.insert("unknowns".into(), grid.active().len() as f64);
    Ok(out)
}

/// Lowest `n_states` eigenpairs of `-ħ²/2m ∇² + V` with a second-order stencil
/// (the `l = 0` reduced operator on radial grids).
pub fn solve_schrodinger_stationary(
    grid: &Grid,
    potential: &PotentialSpec,
    n_states: usize,
    units: &UnitSystem,
) -> Result<SpectrumResult> {
    solve_schrodinger_with(grid, potential, n_states, units, Discretization::default())
}

pub fn solve_schrodinger_with(
    grid: &Grid,
    potential: &PotentialSpec,
    n_states: usize,
    units: &UnitSystem,
    disc: Discretization,
) -> Result<SpectrumResult> {
    units.validate()?;
    let lap = laplacian_for(grid, disc)?;
    let v = potential.sample(grid)?;
    linear_spectrum(&lap, units.kinetic_prefactor(), &v, n_states)
}

/// Crank–Nicolson evolution of `iħ ψ_t = (-ħ²/2m ∇² + V) ψ`. Wall values are
/// pinned to zero.
pub fn propagate_schrodinger(
    psi0: &WaveField,
    potential: &PotentialSpec,
    dt: f64,
    steps: usize,
    units: &UnitSystem,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(WaveError::config(format!("dt must be > 0, got {dt}")));
    }
    units.validate()?;
    let grid = psi0.grid;
    let lap = laplacian_for(&grid, Discretization::default())?;
    let v = potential.sample(&grid)?;
    let kinetic = units.kinetic_prefactor();
    let alpha = dt / (2.0 * units.hbar);
    let active = grid.active();
    let start = active.start;
    let n = active.len();
    let i_alpha = Complex64::new(0.0, alpha);
    let solver = ComplexBandSolver::new(n, lap.bandwidth(), grid.is_periodic(), |i, j| {
        let (gi, gj) = (start + i, start + j);
        let mut h = -kinetic * lap.entry(gi, gj);
        if gi == gj {
            h += v[gi];
        }
        let id = if i == j { 1.0 } else { 0.0 };
        Complex64::new(id, 0.0) + i_alpha * h
    })?;

    let mut psi = psi0.values.clone();
    for (i, p) in psi.iter_mut().enumerate() {
        if !active.contains(&i) {
            *p = Complex64::new(0.0, 0.0);
        }
    }
    let mut traj = Trajectory::start(dt, WaveField { grid, values: psi.clone() }, grid_norm(&grid, &psi), steps);
    for step in 1..=steps {
        let h = apply_hamiltonian(&lap, kinetic, &v, &psi);
        let rhs: Vec<Complex64> = active.clone().map(|i| psi[i] - i_alpha * h[i]).collect();
        let next = solver.solve(&rhs);
        psi[active.clone()].copy_from_slice(&next);
        traj.push(step as f64 * dt, WaveField { grid, values: psi.clone() }, grid_norm(&grid, &psi));
    }
    Ok(traj)
}

/// `√(c²p² + E0²)`.
pub fn klein_gordon_energy(p: f64, rest_energy: f64, c: f64) -> f64 {
    (c * c * p * p + rest_energy * rest_energy).sqrt()
}

/// `(+√(c²p² + E0²), −√(c²p² + E0²))`.
pub fn dirac_free_energies(p: f64, rest_energy: f64, c: f64) -> (f64, f64) {
    let e = klein_gordon_energy(p, rest_energy, c);
    (e, -e)
}

/// Infinite well of width `length`, level `n ≥ 1`.
pub fn infinite_well_energy(n: usize, length: f64, units: &UnitSystem) -> f64 {
    let k = n as f64 * PI * units.hbar / length;
    k * k / (2.0 * units.mass)
}

/// `ħω(n + 1/2)`.
pub fn harmonic_energy(n: usize, omega: f64, units: &UnitSystem) -> f64 {
    units.hbar * omega * (n as f64 + 0.5)
}

/// `−k² m / (2ħ² n²)` for `V = −k/r`, `n ≥ 1`.
pub fn hydrogenic_energy(n: usize, strength: f64, units: &UnitSystem) -> f64 {
    let nn = n as f64;
    -strength * strength * units.mass / (2.0 * units.hbar * units.hbar * nn * nn)
}

/// Analytic reduced ground state `u(r) = 2 a^{-3/2} r e^{-r/a}`, `a = ħ²/(mk)`,
/// sampled on a radial grid and normalized on it.
pub fn hydrogenic_ground_state(grid: &Grid, strength: f64, units: &UnitSystem) -> WaveField {
    let a = units.hbar * units.hbar / (units.mass * strength);
    WaveField::from_fn(grid, |r| Complex64::new(2.0 * a.powf(-1.5) * r * (-r / a).exp(), 0.0)).normalized()
}

/// Normalized Gaussian packet whose density has standard deviation `sigma`.
pub fn gaussian_packet(grid: &Grid, center: f64, sigma: f64, k0: f64) -> WaveField {
    WaveField::from_fn(grid, |x| {
        let u = x - center;
        Complex64::from_polar((-u * u / (4.0 * sigma * sigma)).exp(), k0 * u)
    })
    .normalized()
}

/// Density width of a free Gaussian packet at time `t`.
pub fn free_gaussian_width(sigma0: f64, t: f64, units: &UnitSystem) -> f64 {
    let tau = units.hbar * t / (2.0 * units.mass * sigma0 * sigma0);
    sigma0 * (1.0 + tau * tau).sqrt()
}

/// Bound-state energies of the finite well `-depth` on `|x| ≤ half_width`,
/// ascending, from the even (`k tan ka = κ`) and odd (`-k cot ka = κ`)
/// matching conditions.
pub fn finite_well_energies(depth: f64, half_width: f64, units: &UnitSystem) -> Vec<f64> {
    let z0 = half_width * (2.0 * units.mass * depth).sqrt() / units.hbar;
    let tail = |z: f64| (z0 * z0 - z * z).max(0.0).sqrt();
    let even = |z: f64| z * z.tan() - tail(z);
    let odd = |z: f64| -z / z.tan() - tail(z);
    let mut roots = Vec::new();
    let mut j = 0usize;
    loop {
        let lo = j as f64 * PI / 2.0;
        if lo >= z0 {
            break;
        }
        let hi = ((j + 1) as f64 * PI / 2.0).min(z0);
        let f: &dyn Fn(f64) -> f64 = if j % 2 == 0 { &even } else { &odd };
        // Both conditions run from −tail at `lo` up to +∞ (or ≥ 0 at z0).
        let eps = 1e-15 * (1.0 + hi);
        let (mut a, mut b) = (lo + eps, hi - if hi < z0 { eps } else { 0.0 });
        if f(a) < 0.0 && f(b) >= 0.0 {
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if f(m) < 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            let z = 0.5 * (a + b);
            roots.push(units.hbar * units.hbar * z * z / (2.0 * units.mass * half_width * half_width) - depth);
        }
        j += 1;
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numgrid::Boundary;

    #[test]
    fn dispersion_catalog() {
        assert_eq!(klein_gordon_energy(0.0, 4.0, 1.0), 4.0);
        assert_eq!(klein_gordon_energy(2.0, 0.0, 3.0), 6.0);
        assert_eq!(klein_gordon_energy(3.0, 4.0, 1.0), 5.0);
        assert_eq!(dirac_free_energies(3.0, 4.0, 1.0), (5.0, -5.0));
        assert_eq!(dirac_free_energies(0.0, 2.0, 1.0), (2.0, -2.0));
        assert_eq!(dirac_free_energies(1.0, 0.0, 1.0), (1.0, -1.0));
    }

    #[test]
    fn infinite_well_levels() {
        let u = UnitSystem::natural();
        let g = Grid::line(0.0, PI, 2048, Boundary::Dirichlet).unwrap();
        let s = solve_schrodinger_stationary(&g, &PotentialSpec::free(), 5, &u).unwrap();
        for n in 1..=5 {
            let exact = infinite_well_energy(n, PI, &u);
            assert!((s.energies[n - 1] / exact - 1.0).abs() < 1e-3);
            assert_eq!(s.node_counts[n - 1], n - 1);
            assert!(s.residuals[n - 1] < 1e-8, "{}", s.residuals[n - 1]);
        }
    }

    #[test]
    fn harmonic_and_hydrogen_levels() {
        let u = UnitSystem::natural();
        let g = Grid::line(-10.0, 10.0, 2001, Boundary::Dirichlet).unwrap();
        let s = solve_schrodinger_stationary(&g, &PotentialSpec::harmonic(1.0, 1.0), 4, &u).unwrap();
        for n in 0..4 {
            assert!((s.energies[n] - harmonic_energy(n, 1.0, &u)).abs() < 1e-3);
        }
        let r = Grid::radial(40.0, 8000).unwrap();
        let h = solve_schrodinger_stationary(&r, &PotentialSpec::coulomb(1.0), 2, &u).unwrap();
        assert!((h.energies[0] + 0.5).abs() < 1e-3, "{}", h.energies[0]);
        assert!((h.energies[1] - hydrogenic_energy(2, 1.0, &u)).abs() < 1e-3);
    }

    #[test]
    fn finite_well_roots_satisfy_matching() {
        let u = UnitSystem::natural();
        let e = finite_well_energies(10.0, 1.0, &u);
        assert_eq!(e.len(), 3);
        // well edges halfway between nodes
        let g = Grid::line(-8.002, 8.002, 4002, Boundary::Dirichlet).unwrap();
        let s = solve_schrodinger_stationary(&g, &PotentialSpec::square_well(10.0, 1.0), 3, &u).unwrap();
        for (a, b) in e.iter().zip(&s.energies) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn too_many_states_is_config_error() {
        let g = Grid::line(0.0, 1.0, 10, Boundary::Dirichlet).unwrap();
        let r = solve_schrodinger_stationary(&g, &PotentialSpec::free(), 9, &UnitSystem::natural());
        assert!(matches!(r, Err(WaveError::Config(_))));
    }

    #[test]
    fn crank_nicolson_keeps_eigenstates_and_norm() {
        let u = UnitSystem::natural();
        let g = Grid::line(-8.0, 8.0, 801, Boundary::Dirichlet).unwrap();
        let v = PotentialSpec::harmonic(1.0, 1.0);
        let s = solve_schrodinger_stationary(&g, &v, 1, &u).unwrap();
        let t = propagate_schrodinger(&s.states[0], &v, 0.01, 1000, &u).unwrap();
        let overlap = crate::numgrid::inner_product(t.last(), &s.states[0]).unwrap().norm();
        assert!((overlap - 1.0).abs() < 1e-8);
        assert!(t.max_norm_drift() < 1e-10);
        let z = propagate_schrodinger(&WaveField::zeros(&g), &v, 0.01, 10, &u).unwrap();
        assert!(z.last().values.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn periodic_crank_nicolson_is_unitary() {
        let u = UnitSystem::natural();
        let g = Grid::line(0.0, 2.0 * PI, 256, Boundary::Periodic).unwrap();
        let psi = WaveField::from_fn(&g, |x| Complex64::from_polar(1.0 + 0.3 * x.sin(), 2.0 * x));
        let t = propagate_schrodinger(&psi, &PotentialSpec::free(), 0.01, 200, &u).unwrap();
        assert!(t.max_norm_drift() < 1e-12);
    }
}
