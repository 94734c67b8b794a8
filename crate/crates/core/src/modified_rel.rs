//! Relativistic modified equations with a Lorentz-invariant scalar potential.
//!
//! Stationary: `−c²ħ² ψ'' = [(E − V)² − E0²](1 + V/E0)² ψ`.
//! Time-dependent: `Φ_tt = [c² ∇² − E0²/ħ²] Φ / (1 + V/E0)²`, which is the
//! Klein–Gordon equation when `V = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::modified_nr::{ModifiedEigenResult, SolveMethod, StateScan, SHOOTING_SAMPLES};
use crate::numgrid::{laplacian_for, Discretization, Grid, WaveField};
use crate::potentials::PotentialSpec;
use crate::reference::{fix_sign, grid_norm, Trajectory};
use crate::shooting::{scan_roots, Ends, PiecewiseOde};
use crate::units::UnitSystem;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct RelScenario {
    pub units: UnitSystem,
    pub potential: PotentialSpec,
    pub grid: Grid,
    pub ends: Ends,
}

impl RelScenario {
    /// Checks `V > −E0` on the grid (and on every region of a piecewise potential).
    pub fn new(units: UnitSystem, potential: PotentialSpec, grid: Grid, ends: Ends) -> Result<Self> {
        units.validate()?;
        let e0 = units.rest_energy;
        let mut values = potential.sample(&grid)?;
        if let Some(p) = potential.piecewise() {
            values.extend(p.values);
        }
        if let Some(v) = values.iter().find(|v| !(**v > -e0)) {
            return Err(WaveError::InvalidScenario(format!(
                "V = {v} reaches -E0 = {}; the factor 1 + V/E0 must stay positive",
                -e0
            )));
        }
        Ok(RelScenario {
            units,
            potential,
            grid,
            ends,
        })
    }

    /// Walls at the grid ends.
    pub fn boxed(units: UnitSystem, potential: PotentialSpec, grid: Grid) -> Result<Self> {
        let ends = Ends::Walls(grid.x_min(), grid.x_max());
        Self::new(units, potential, grid, ends)
    }
}

/// `[(E − V)² − E0²](1 + V/E0)²`
pub fn local_factor(energy: f64, v: f64, rest_energy: f64) -> f64 {
    ((energy - v).powi(2) - rest_energy * rest_energy) * (1.0 + v / rest_energy).powi(2)
}

/// Every bound state of the stationary equation inside `bracket`.
pub fn solve_rel_stationary(scenario: &RelScenario, bracket: (f64, f64)) -> Result<StateScan> {
    solve_rel_stationary_with(scenario, bracket, SHOOTING_SAMPLES)
}

pub fn solve_rel_stationary_with(scenario: &RelScenario, bracket: (f64, f64), samples: usize) -> Result<StateScan> {
    match scenario.potential.piecewise() {
        Some(p) => shoot(scenario, &p.breakpoints, &p.values, bracket, samples),
        None => grid_scan(scenario, bracket, samples),
    }
}

fn shoot(scenario: &RelScenario, edges: &[f64], values: &[f64], bracket: (f64, f64), samples: usize) -> Result<StateScan> {
    let u = &scenario.units;
    let hc2 = u.hbar_c().powi(2);
    let ode = |e: f64| PiecewiseOde {
        edges: edges.to_vec(),
        k2: values.iter().map(|v| local_factor(e, *v, u.rest_energy) / hc2).collect(),
    };
    let scan = scan_roots(|e| ode(e).shoot(scenario.ends).map(|s| s.mismatch), bracket.0, bracket.1, samples, &[])?;
    if scan.roots.is_empty() {
        return Err(WaveError::NoRoot {
            lo: bracket.0,
            hi: bracket.1,
        });
    }
    let grid = scenario.grid;
    let mut states = Vec::new();
    for e in scan.roots {
        let Some(shot) = ode(e).shoot(scenario.ends) else { continue };
        let mut v = shot.sample(&grid.points());
        for (i, x) in v.iter_mut().enumerate() {
            if !grid.active().contains(&i) {
                *x = 0.0;
            }
        }
        fix_sign(&mut v);
        states.push(ModifiedEigenResult {
            energy: e,
            state: WaveField::from_real(&grid, &v)?.normalized(),
            iterations: 1,
            self_consistency_residual: 0.0,
            node_count: shot.interior_zeros(),
            method: SolveMethod::Shooting,
            history: Vec::new(),
        });
    }
    Ok(StateScan {
        states,
        skipped: scan.skipped,
    })
}

/// Smooth potentials: the grid operator `M(E) = −(ħc)² L − diag(g(E, x))` is
/// singular at a bound state; roots are located from jumps in its negative
/// eigenvalue count and refined by bisection on that count.
fn grid_scan(scenario: &RelScenario, bracket: (f64, f64), samples: usize) -> Result<StateScan> {
    let (lo, hi) = bracket;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(WaveError::config(format!("energy bracket [{lo}, {hi}] is empty or not finite")));
    }
    let u = &scenario.units;
    let grid = scenario.grid;
    let lap = laplacian_for(&grid, Discretization::default())?;
    let v = scenario.potential.sample(&grid)?;
    let hc2 = u.hbar_c().powi(2);
    let n = grid.active().len();
    let matrix = |e: f64| {
        let g: Vec<f64> = v.iter().map(|vi| -local_factor(e, *vi, u.rest_energy)).collect();
        lap.restrict(-hc2, &g, vec![1.0; n])
    };
    let count = |e: f64| matrix(e).map(|m| m.count_below(0.0));

    let samples = samples.max(2);
    let mut states = Vec::new();
    let mut prev = (lo, count(lo)?);
    for i in 1..=samples {
        let e = lo + (hi - lo) * i as f64 / samples as f64;
        let c = count(e)?;
        if c != prev.1 {
            let (mut a, mut b) = (prev.0, e);
            let ca = prev.1;
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if count(mid)? == ca {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let root = 0.5 * (a + b);
            let m = matrix(root)?;
            let index = ca.min(c);
            let (_, mut vec) = m.eigenpairs(&[index])?.remove(0);
            fix_sign(&mut vec);
            let state = WaveField::from_real(&grid, &grid.lift(&vec))?.normalized();
            states.push(ModifiedEigenResult {
                energy: root,
                node_count: state.node_count(),
                state,
                iterations: 1,
                self_consistency_residual: b - a,
                method: SolveMethod::GridScan,
                history: Vec::new(),
            });
        }
        prev = (e, c);
    }
    if states.is_empty() {
        return Err(WaveError::NoRoot { lo, hi });
    }
    Ok(StateScan {
        states,
        skipped: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelRun {
    pub trajectory: Trajectory,
    /// Largest stable step for the scenario (with the 0.9 safety factor).
    pub dt_limit: f64,
}

/// Growth of the grid norm beyond this factor aborts the run.
const GROWTH_LIMIT: f64 = 10.0;

/// Leapfrog for `Φ_tt = [c² L − E0²/ħ²] Φ / (1 + V/E0)²`; `Φ` obeys the grid's
/// boundary condition.
pub fn propagate_rel_timedep(
    phi0: &WaveField,
    dphi0_dt: &WaveField,
    scenario: &RelScenario,
    dt: f64,
    steps: usize,
) -> Result<RelRun> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(WaveError::config(format!("dt must be > 0, got {dt}")));
    }
    if !phi0.grid.same_as(&dphi0_dt.grid) || !phi0.grid.same_as(&scenario.grid) {
        return Err(WaveError::usage("Φ, ∂Φ/∂t and the scenario must share one grid"));
    }
    let u = &scenario.units;
    let grid = scenario.grid;
    let lap = laplacian_for(&grid, Discretization::default())?;
    let v = scenario.potential.sample(&grid)?;
    let e0 = u.rest_energy;
    let weight: Vec<f64> = v.iter().map(|vi| 1.0 / (1.0 + vi / e0).powi(2)).collect();
    let c2 = u.c * u.c;
    let mass_term = (e0 / u.hbar).powi(2);
    let w_max = grid.active().map(|i| weight[i]).fold(0.0, f64::max);
    let dt_limit = 0.9 * 2.0 / (w_max * (c2 * lap.gershgorin_radius() + mass_term)).sqrt();

    let active = grid.active();
    let pinned = |mut x: Vec<Complex64>| {
        for (i, z) in x.iter_mut().enumerate() {
            if !active.contains(&i) {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        x
    };
    let accel = |phi: &[Complex64]| -> Vec<Complex64> {
        let lp = lap.apply_values(phi);
        (0..phi.len())
            .map(|i| (lp[i] * c2 - phi[i] * mass_term) * weight[i])
            .collect()
    };

    let p0 = pinned(phi0.values.clone());
    let v0 = pinned(dphi0_dt.values.clone());
    let a0 = accel(&p0);
    let norm0 = grid_norm(&grid, &p0);
    let mut traj = Trajectory::start(dt, WaveField { grid, values: p0.clone() }, norm0, steps);
    if steps == 0 {
        return Ok(RelRun { trajectory: traj, dt_limit });
    }
    let mut prev = p0.clone();
    let mut cur = pinned((0..p0.len()).map(|i| p0[i] + v0[i] * dt + a0[i] * (0.5 * dt * dt)).collect());
    for step in 1..=steps {
        let norm = grid_norm(&grid, &cur);
        let reference = norm0.max(grid_norm(&grid, &v0) * dt).max(f64::MIN_POSITIVE);
        if !norm.is_finite() || (norm > 0.0 && norm > GROWTH_LIMIT * reference) {
            return Err(WaveError::Stability {
                step,
                growth: norm / reference,
            });
        }
        traj.push(step as f64 * dt, WaveField { grid, values: cur.clone() }, norm);
        if step == steps {
            break;
        }
        let a = accel(&cur);
        let next = pinned((0..cur.len()).map(|i| 2.0 * cur[i] - prev[i] + a[i] * (dt * dt)).collect());
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(RelRun { trajectory: traj, dt_limit })
}

/// `e ε φ / E0`; a nonzero vector potential is outside what is modelled.
pub fn electrostatic_invariant_potential(
    phi: f64,
    epsilon: f64,
    charge: f64,
    vector_potential: &[f64],
    units: &UnitSystem,
) -> Result<f64> {
    if vector_potential.iter().any(|a| *a != 0.0) {
        return Err(WaveError::OutOfScope(
            "only the electrostatic case (zero vector potential) is supported; the A·p coupling is not modelled".into(),
        ));
    }
    units.validate()?;
    Ok(charge * epsilon * phi / units.rest_energy)
}

/// How far `E − V(x)` strays from a fixed `ε` over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonCheck {
    pub max_deviation: f64,
    /// `ε = E − V(x)` cannot hold everywhere.
    pub conflict: bool,
}

pub fn check_epsilon(potential: &PotentialSpec, grid: &Grid, energy: f64, epsilon: f64) -> Result<EpsilonCheck> {
    let v = potential.sample(grid)?;
    let max_deviation = v.iter().map(|vi| (energy - vi - epsilon).abs()).fold(0.0, f64::max);
    let scale = energy.abs().max(epsilon.abs()).max(1.0);
    Ok(EpsilonCheck {
        max_deviation,
        conflict: max_deviation > 1e-9 * scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numgrid::Boundary;
    use crate::reference::klein_gordon_energy;
    use std::f64::consts::PI;

    fn units(c: f64) -> UnitSystem {
        UnitSystem::new(1.0, 1.0, c).unwrap()
    }

    #[test]
    fn free_box_levels() {
        let u = units(2.0);
        let g = Grid::line(0.0, 1.0, 101, Boundary::Dirichlet).unwrap();
        let s = RelScenario::boxed(u, PotentialSpec::free(), g).unwrap();
        let e0 = u.rest_energy;
        let r = solve_rel_stationary(&s, (e0 + 1e-6, klein_gordon_energy(3.5 * PI, e0, 2.0))).unwrap();
        assert_eq!(r.states.len(), 3);
        for (i, st) in r.states.iter().enumerate() {
            let want = klein_gordon_energy((i + 1) as f64 * PI, e0, 2.0);
            assert!((st.energy - want).abs() < 1e-10);
            assert_eq!(st.node_count, i);
        }
    }

    #[test]
    fn invalid_potential_rejected() {
        let u = units(1.0);
        let g = Grid::line(-2.0, 2.0, 41, Boundary::Dirichlet).unwrap();
        let err = RelScenario::boxed(u, PotentialSpec::square_well(1.0, 0.5), g);
        assert!(matches!(err, Err(WaveError::InvalidScenario(_))));
    }

    #[test]
    fn electrostatic_prefactor() {
        let u = units(1.0);
        assert_eq!(electrostatic_invariant_potential(0.0, 3.0, 1.0, &[], &u).unwrap(), 0.0);
        assert!((electrostatic_invariant_potential(0.3, 1.0, 1.0, &[0.0; 3], &u).unwrap() - 0.3).abs() < 1e-15);
        assert!((electrostatic_invariant_potential(0.3, 2.0, 1.0, &[], &u).unwrap() - 0.6).abs() < 1e-15);
        assert!(matches!(
            electrostatic_invariant_potential(0.3, 2.0, 1.0, &[0.0, 0.1, 0.0], &u),
            Err(WaveError::OutOfScope(_))
        ));
    }

    #[test]
    fn oversized_step_is_caught() {
        let u = units(1.0);
        let g = Grid::line(0.0, 2.0 * PI, 64, Boundary::Periodic).unwrap();
        let s = RelScenario::new(u, PotentialSpec::free(), g, Ends::Open).unwrap();
        let phi = WaveField::from_fn(&g, |x| Complex64::new((3.0 * x).cos(), 0.0) + 1e-6 * Complex64::new((31.0 * x).cos(), 0.0));
        let zero = WaveField::zeros(&g);
        let limit = propagate_rel_timedep(&phi, &zero, &s, 1e-3, 1).unwrap().dt_limit;
        assert!(matches!(
            propagate_rel_timedep(&phi, &zero, &s, 1.5 * limit / 0.9, 400),
            Err(WaveError::Stability { .. })
        ));
    }
}
