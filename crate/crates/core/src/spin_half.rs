//! Modified Dirac sector in the 1D two-component reduction `α = σx`, `β = σz`.
//!
//! The stationary problem `H_D ψ = E (1 + V/E0) ψ` is solved as a real
//! symmetric generalized problem: with `ψ = (a, i b)` the discrete operator
//! `−iħc σx D + σz M` becomes `[[M, ħcD], [−ħcD, −M]]` acting on `(a, b)`,
//! where `D` is the centered first difference and `M = E0 − r (ħc h/2) L`
//! carries the Wilson term.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::linalg::BandedSym;
use crate::numgrid::{build_laplacian, BandedOperator, Grid, GridKind, WaveField};
use crate::potentials::PotentialSpec;
use crate::reference::{SpectrumResult, Trajectory};
use crate::units::UnitSystem;

pub type Matrix = Vec<Vec<Complex64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CliffordDim {
    Reduced2,
    Full4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliffordSet {
    pub alphas: Vec<Matrix>,
    pub beta: Matrix,
    pub pauli: [Matrix; 3],
    pub dimension: CliffordDim,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pauli() -> [Matrix; 3] {
    let (o, l, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    [
        vec![vec![o, l], vec![l, o]],
        vec![vec![o, -i], vec![i, o]],
        vec![vec![l, o], vec![o, -l]],
    ]
}

fn identity(n: usize) -> Matrix {
    (0..n)
        .map(|i| (0..n).map(|j| c(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect()
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// `max |(ab + ba − target)_ij|`
fn anticommutator_violation(a: &Matrix, b: &Matrix, target: &Matrix) -> f64 {
    let ab = matmul(a, b);
    let ba = matmul(b, a);
    let mut worst = 0.0f64;
    for i in 0..a.len() {
        for j in 0..a.len() {
            worst = worst.max((ab[i][j] + ba[i][j] - target[i][j]).norm());
        }
    }
    worst
}

impl CliffordSet {
    /// `α_i = [[0, σ_i], [σ_i, 0]]`, `β = diag(I, −I)`.
    pub fn full() -> Self {
        let p = pauli();
        let zero = c(0.0, 0.0);
        let alphas = p
            .iter()
            .map(|s| {
                let mut m = vec![vec![zero; 4]; 4];
                for i in 0..2 {
                    for j in 0..2 {
                        m[i][j + 2] = s[i][j];
                        m[i + 2][j] = s[i][j];
                    }
                }
                m
            })
            .collect();
        let mut beta = identity(4);
        beta[2][2] = c(-1.0, 0.0);
        beta[3][3] = c(-1.0, 0.0);
        CliffordSet {
            alphas,
            beta,
            pauli: p,
            dimension: CliffordDim::Full4,
        }
    }

    pub fn reduced() -> Self {
        let p = pauli();
        CliffordSet {
            alphas: vec![p[0].clone()],
            beta: p[2].clone(),
            pauli: p,
            dimension: CliffordDim::Reduced2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CliffordReport {
    /// `α_iα_k + α_kα_i − 2δ_ik`
    pub alpha_alpha: f64,
    /// `α_iβ + βα_i`
    pub alpha_beta: f64,
    /// `β² − I`
    pub beta_square: f64,
    /// `σ_iσ_k + σ_kσ_i − 2δ_ik`
    pub pauli: f64,
    pub max_violation: f64,
}

pub fn clifford_check(set: &CliffordSet) -> CliffordReport {
    let n = set.beta.len();
    let id = identity(n);
    let two_id: Matrix = id.iter().map(|r| r.iter().map(|v| v * 2.0).collect()).collect();
    let zero = vec![vec![c(0.0, 0.0); n]; n];
    let mut alpha_alpha = 0.0f64;
    let mut alpha_beta = 0.0f64;
    for (i, a) in set.alphas.iter().enumerate() {
        for (k, b) in set.alphas.iter().enumerate() {
            let target = if i == k { &two_id } else { &zero };
            alpha_alpha = alpha_alpha.max(anticommutator_violation(a, b, target));
        }
        alpha_beta = alpha_beta.max(anticommutator_violation(a, &set.beta, &zero));
    }
    let beta_square = anticommutator_violation(&set.beta, &set.beta, &two_id) / 2.0;
    let id2 = identity(2);
    let two2: Matrix = id2.iter().map(|r| r.iter().map(|v| v * 2.0).collect()).collect();
    let zero2 = vec![vec![c(0.0, 0.0); 2]; 2];
    let mut pauli = 0.0f64;
    for i in 0..3 {
        for k in 0..3 {
            let target = if i == k { &two2 } else { &zero2 };
            pauli = pauli.max(anticommutator_violation(&set.pauli[i], &set.pauli[k], target));
        }
    }
    CliffordReport {
        alpha_alpha,
        alpha_beta,
        beta_square,
        pauli,
        max_violation: alpha_alpha.max(alpha_beta).max(beta_square).max(pauli),
    }
}

/// Two complex components on one line grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub grid: Grid,
    pub upper: Vec<Complex64>,
    pub lower: Vec<Complex64>,
}

impl SpinorField {
    pub fn new(grid: &Grid, upper: Vec<Complex64>, lower: Vec<Complex64>) -> Result<Self> {
        if upper.len() != grid.len() || lower.len() != grid.len() {
            return Err(WaveError::usage("spinor components must match the grid length"));
        }
        Ok(SpinorField {
            grid: *grid,
            upper,
            lower,
        })
    }

    pub fn zeros(grid: &Grid) -> Self {
        let z = vec![c(0.0, 0.0); grid.len()];
        SpinorField {
            grid: *grid,
            upper: z.clone(),
            lower: z,
        }
    }

    pub fn from_fn(grid: &Grid, f: impl FnMut(f64) -> (Complex64, Complex64)) -> Self {
        let (upper, lower) = grid.points().into_iter().map(f).unzip();
        SpinorField {
            grid: *grid,
            upper,
            lower,
        }
    }

    /// Positive or negative energy free plane wave `u e^{ipx/ħ}` (unit amplitude).
    pub fn plane_wave(grid: &Grid, p: f64, positive: bool, units: &UnitSystem) -> Self {
        let e0 = units.rest_energy;
        let e = (units.c * units.c * p * p + e0 * e0).sqrt();
        let cp = units.c * p;
        let (u, l) = if positive { (e + e0, cp) } else { (cp, -(e + e0)) };
        let n = (u * u + l * l).sqrt();
        let (u, l) = if n > 0.0 { (u / n, l / n) } else { (1.0, 0.0) };
        SpinorField::from_fn(grid, |x| {
            let phase = c(0.0, p * x / units.hbar).exp();
            (phase * u, phase * l)
        })
    }

    pub fn component(&self, upper: bool) -> WaveField {
        WaveField {
            grid: self.grid,
            values: if upper { self.upper.clone() } else { self.lower.clone() },
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.component(true).norm_sqr() + self.component(false).norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, f: Complex64) -> Self {
        SpinorField {
            grid: self.grid,
            upper: self.upper.iter().map(|v| v * f).collect(),
            lower: self.lower.iter().map(|v| v * f).collect(),
        }
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            self.clone()
        } else {
            self.scaled(c(1.0 / n, 0.0))
        }
    }
}

fn check_line(grid: &Grid) -> Result<()> {
    if grid.kind() == GridKind::Radial {
        return Err(WaveError::config("spinor solvers need a line grid"));
    }
    Ok(())
}

/// `1 + V/E0` on the grid; rejects `V ≤ −E0`.
fn weight_factor(grid: &Grid, potential: &PotentialSpec, units: &UnitSystem) -> Result<Vec<f64>> {
    let e0 = units.rest_energy;
    let v = potential.sample(grid)?;
    if let Some(bad) = v.iter().find(|vi| !(**vi > -e0)) {
        return Err(WaveError::InvalidScenario(format!(
            "V = {bad} reaches -E0 = {}; the factor 1 + V/E0 must stay positive",
            -e0
        )));
    }
    Ok(v.iter().map(|vi| 1.0 + vi / e0).collect())
}

/// Centered first difference on the full grid; wall rows give zero.
fn centered_difference(grid: &Grid, f: &[Complex64]) -> Vec<Complex64> {
    let n = grid.len();
    let inv = 1.0 / (2.0 * grid.spacing());
    let active = grid.active();
    let mut out = vec![c(0.0, 0.0); n];
    for i in active.clone() {
        let (r, l) = if grid.is_periodic() {
            (f[(i + 1) % n], f[(i + n - 1) % n])
        } else {
            let r = if i + 1 < n { f[i + 1] } else { c(0.0, 0.0) };
            let l = if i >= 1 { f[i - 1] } else { c(0.0, 0.0) };
            (r, l)
        };
        out[i] = (r - l) * inv;
    }
    out
}

fn pinned(grid: &Grid, mut v: Vec<Complex64>) -> Vec<Complex64> {
    let active = grid.active();
    for (i, z) in v.iter_mut().enumerate() {
        if !active.contains(&i) {
            *z = c(0.0, 0.0);
        }
    }
    v
}

/// `E0/(E0 + V) · (−iħc σx ∂ψ + E0 σz ψ)`, the prefactor applied after differentiation.
pub fn apply_modified_hamiltonian(psi: &SpinorField, potential: &PotentialSpec, units: &UnitSystem) -> Result<SpinorField> {
    units.validate()?;
    check_line(&psi.grid)?;
    let grid = psi.grid;
    let w = weight_factor(&grid, potential, units)?;
    let e0 = units.rest_energy;
    let hc = units.hbar_c();
    let up = pinned(&grid, psi.upper.clone());
    let lo = pinned(&grid, psi.lower.clone());
    let du = centered_difference(&grid, &up);
    let dl = centered_difference(&grid, &lo);
    let mi = c(0.0, -hc);
    let mut upper = vec![c(0.0, 0.0); grid.len()];
    let mut lower = vec![c(0.0, 0.0); grid.len()];
    for i in grid.active() {
        let f = 1.0 / w[i];
        upper[i] = (mi * dl[i] + up[i] * e0) * f;
        lower[i] = (mi * du[i] - lo[i] * e0) * f;
    }
    Ok(SpinorField { grid, upper, lower })
}

/// The interleaved real operator on active nodes: unknown `2i` is `a_i`, `2i+1` is `b_i`.
struct DiracMatrix {
    lap: BandedOperator,
    start: usize,
    nodes: usize,
    periodic: bool,
    inv2h: f64,
    hc: f64,
    mass: f64,
    wilson: f64,
}

impl DiracMatrix {
    fn new(grid: &Grid, units: &UnitSystem, mass: f64, wilson_r: f64) -> Result<Self> {
        check_line(grid)?;
        let active = grid.active();
        let hc = units.hbar_c();
        Ok(DiracMatrix {
            lap: build_laplacian(grid, 2)?,
            start: active.start,
            nodes: active.len(),
            periodic: grid.is_periodic(),
            inv2h: 1.0 / (2.0 * grid.spacing()),
            hc,
            mass,
            wilson: wilson_r * hc * grid.spacing() / 2.0,
        })
    }

    fn d(&self, i: usize, j: usize) -> f64 {
        let n = self.nodes;
        let fwd = if self.periodic { (i + 1) % n == j } else { i + 1 == j };
        let back = if self.periodic { (j + 1) % n == i } else { j + 1 == i };
        if fwd {
            self.inv2h
        } else if back {
            -self.inv2h
        } else {
            0.0
        }
    }

    fn m(&self, i: usize, j: usize) -> f64 {
        let id = if i == j { self.mass } else { 0.0 };
        id - self.wilson * self.lap.entry(self.start + i, self.start + j)
    }

    fn entry(&self, row: usize, col: usize) -> f64 {
        let (i, ci) = (row / 2, row % 2);
        let (j, cj) = (col / 2, col % 2);
        match (ci, cj) {
            (0, 0) => self.m(i, j),
            (0, 1) => self.hc * self.d(i, j),
            (1, 0) => -self.hc * self.d(i, j),
            _ => -self.m(i, j),
        }
    }

    fn build(&self, weight: &[f64]) -> Result<BandedSym> {
        if self.periodic && self.nodes % 2 != 0 {
            return Err(WaveError::config(format!(
                "periodic spinor grids need an even number of points, got {}",
                self.nodes
            )));
        }
        let k = if self.periodic { 4 } else { 3 };
        let w: Vec<f64> = (0..2 * self.nodes).map(|r| weight[self.start + r / 2]).collect();
        BandedSym::from_fn(2 * self.nodes, k, self.periodic, w, |r, c| self.entry(r, c))
    }
}

fn spinor_spectrum(grid: &Grid, matrix: &BandedSym, n_states: usize) -> Result<SpectrumResult<SpinorField>> {
    if n_states == 0 || n_states > matrix.len() {
        return Err(WaveError::config(format!(
            "n_states must lie in 1..={}, got {n_states}",
            matrix.len()
        )));
    }
    let pairs = matrix.smallest_magnitude(n_states)?;
    let mut out = SpectrumResult {
        energies: Vec::new(),
        states: Vec::new(),
        node_counts: Vec::new(),
        residuals: Vec::new(),
        diagnostics: BTreeMap::new(),
    };
    for (e, x) in pairs {
        out.residuals.push(matrix.residual(e, &x));
        let a: Vec<Complex64> = x.iter().step_by(2).map(|v| c(*v, 0.0)).collect();
        let b: Vec<Complex64> = x.iter().skip(1).step_by(2).map(|v| c(0.0, *v)).collect();
        let state = SpinorField::new(grid, grid.lift(&a), grid.lift(&b))?.normalized();
        out.node_counts.push(state.component(true).node_count());
        out.energies.push(e);
        out.states.push(state);
    }
    out.diagnostics.insert(
        "max_residual".into(),
        out.residuals.iter().copied().fold(0.0, f64::max),
    );
    out.diagnostics.insert("unknowns".into(), matrix.len() as f64);
    Ok(out)
}

/// Eigenpairs of `H_D ψ = E (1 + V/E0) ψ` with smallest `|E|`, sorted by `|E|`.
pub fn solve_spin_half_stationary(
    grid: &Grid,
    potential: &PotentialSpec,
    units: &UnitSystem,
    wilson_r: f64,
    n_states: usize,
) -> Result<SpectrumResult<SpinorField>> {
    units.validate()?;
    if !(wilson_r >= 0.0 && wilson_r.is_finite()) {
        return Err(WaveError::config(format!("wilson_r must be >= 0, got {wilson_r}")));
    }
    let w = weight_factor(grid, potential, units)?;
    let m = DiracMatrix::new(grid, units, units.rest_energy, wilson_r)?.build(&w)?;
    spinor_spectrum(grid, &m, n_states)
}

/// `−iħc σx ∂ψ = E (1 + V/E0) ψ` (no mass, no Wilson term; `E0` only sets the
/// potential scale). Doubler branches are present.
pub fn solve_massless(grid: &Grid, potential: &PotentialSpec, units: &UnitSystem, n_states: usize) -> Result<SpectrumResult<SpinorField>> {
    units.validate()?;
    let w = weight_factor(grid, potential, units)?;
    let m = DiracMatrix::new(grid, units, 0.0, 0.0)?.build(&w)?;
    spinor_spectrum(grid, &m, n_states)
}

const GROWTH_LIMIT: f64 = 10.0;

/// RK4 for `∂Φ/∂t = −c σx ∂Φ / (1 + V/E0)`; the norm is recorded every step.
pub fn propagate_massless(
    psi0: &SpinorField,
    potential: &PotentialSpec,
    dt: f64,
    steps: usize,
    units: &UnitSystem,
) -> Result<Trajectory<SpinorField>> {
    units.validate()?;
    check_line(&psi0.grid)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(WaveError::config(format!("dt must be > 0, got {dt}")));
    }
    let grid = psi0.grid;
    let w = weight_factor(&grid, potential, units)?;
    let speed: Vec<f64> = w.iter().map(|wi| units.c / wi).collect();
    let rhs = |u: &[Complex64], l: &[Complex64]| -> (Vec<Complex64>, Vec<Complex64>) {
        let du = centered_difference(&grid, u);
        let dl = centered_difference(&grid, l);
        (
            dl.iter().zip(&speed).map(|(d, s)| -d * *s).collect(),
            du.iter().zip(&speed).map(|(d, s)| -d * *s).collect(),
        )
    };
    let axpy = |x: &[Complex64], a: f64, y: &[Complex64]| -> Vec<Complex64> { x.iter().zip(y).map(|(p, q)| p + q * a).collect() };

    let mut u = pinned(&grid, psi0.upper.clone());
    let mut l = pinned(&grid, psi0.lower.clone());
    let start = SpinorField {
        grid,
        upper: u.clone(),
        lower: l.clone(),
    };
    let norm0 = start.norm();
    let mut traj = Trajectory::start(dt, start, norm0, steps);
    for step in 1..=steps {
        let (k1u, k1l) = rhs(&u, &l);
        let (k2u, k2l) = rhs(&axpy(&u, 0.5 * dt, &k1u), &axpy(&l, 0.5 * dt, &k1l));
        let (k3u, k3l) = rhs(&axpy(&u, 0.5 * dt, &k2u), &axpy(&l, 0.5 * dt, &k2l));
        let (k4u, k4l) = rhs(&axpy(&u, dt, &k3u), &axpy(&l, dt, &k3l));
        for i in 0..u.len() {
            u[i] += (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i]) * (dt / 6.0);
            l[i] += (k1l[i] + 2.0 * k2l[i] + 2.0 * k3l[i] + k4l[i]) * (dt / 6.0);
        }
        let frame = SpinorField {
            grid,
            upper: u.clone(),
            lower: l.clone(),
        };
        let norm = frame.norm();
        if !norm.is_finite() || (norm0 > 0.0 && norm > GROWTH_LIMIT * norm0) {
            return Err(WaveError::Stability {
                step,
                growth: norm / norm0,
            });
        }
        traj.push(step as f64 * dt, frame, norm);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numgrid::Boundary;
    use std::f64::consts::PI;

    #[test]
    fn clifford_sets_hold_and_corruption_is_seen() {
        assert_eq!(clifford_check(&CliffordSet::full()).max_violation, 0.0);
        assert_eq!(clifford_check(&CliffordSet::reduced()).max_violation, 0.0);
        let mut bad = CliffordSet::full();
        bad.beta[0][1] = c(0.5, 0.0);
        assert!(clifford_check(&bad).max_violation > 0.1);
    }

    #[test]
    fn free_plane_wave_is_an_eigenfield() {
        let u = UnitSystem::new(1.0, 1.0, 1.0).unwrap();
        let g = Grid::line(0.0, 2.0 * PI, 512, Boundary::Periodic).unwrap();
        let psi = SpinorField::plane_wave(&g, 2.0, true, &u);
        let h = apply_modified_hamiltonian(&psi, &PotentialSpec::free(), &u).unwrap();
        let want = (4.0f64 + 1.0).sqrt();
        let ratio = h.upper[7] / psi.upper[7];
        assert!((ratio.re - want).abs() < 1e-3 && ratio.im.abs() < 1e-12, "{ratio}");
    }

    #[test]
    fn rest_energies_and_constant_shift() {
        let u = UnitSystem::new(1.0, 0.25, 1.0).unwrap();
        let g = Grid::line(0.0, 2.0 * PI, 128, Boundary::Periodic).unwrap();
        let r = solve_spin_half_stationary(&g, &PotentialSpec::free(), &u, 1.0, 4).unwrap();
        assert!((r.energies[0].abs() - 0.25).abs() < 1e-12);
        assert!((r.energies[1].abs() - 0.25).abs() < 1e-12);
        assert!(r.energies[0] * r.energies[1] < 0.0);
        let half = solve_spin_half_stationary(&g, &PotentialSpec::constant(0.25), &u, 1.0, 4).unwrap();
        let sorted = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v
        };
        for (a, b) in sorted(&r.energies).iter().zip(&sorted(&half.energies)) {
            assert!((a / 2.0 - b).abs() < 1e-10);
        }
        assert!(r.residuals.iter().all(|x| *x < 1e-8));
    }

    #[test]
    fn odd_periodic_grid_is_rejected() {
        let u = UnitSystem::natural();
        let g = Grid::line(0.0, 1.0, 33, Boundary::Periodic).unwrap();
        assert!(matches!(
            solve_massless(&g, &PotentialSpec::free(), &u, 2),
            Err(WaveError::Config(_))
        ));
    }
}
