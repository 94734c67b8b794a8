//! Plane-wave audit: calibration constants and per-equation residuals for
//! `exp(i(p·x − εt)/ħ)` in a constant potential. Pure closed-form arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::units::UnitSystem;

/// A plane wave of momentum `p` with free energy `epsilon`, total energy
/// `energy`, in the constant potential `potential`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveState {
    pub p: f64,
    pub epsilon: f64,
    pub energy: f64,
    pub potential: f64,
}

impl PlaneWaveState {
    /// Free non-relativistic state: `ε = E = p²/2m`, `V = 0`.
    pub fn free_nr(p: f64, units: &UnitSystem) -> Self {
        let e = p * p / (2.0 * units.mass);
        PlaneWaveState {
            p,
            epsilon: e,
            energy: e,
            potential: 0.0,
        }
    }

    /// Free relativistic state: `ε = E = √(c²p² + E0²)`, `V = 0`.
    pub fn free_rel(p: f64, units: &UnitSystem) -> Self {
        let e = crate::reference::klein_gordon_energy(p, units.rest_energy, units.c);
        PlaneWaveState {
            p,
            epsilon: e,
            energy: e,
            potential: 0.0,
        }
    }

    pub fn with_potential(mut self, v: f64) -> Self {
        self.potential = v;
        self
    }

    pub fn with_energy(mut self, e: f64) -> Self {
        self.energy = e;
        self
    }
}

/// Sign of the square-root branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Positive,
    Negative,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Positive => 1.0,
            Branch::Negative => -1.0,
        }
    }
}

/// `A = 4/ħ²`.
pub fn constant_a(units: &UnitSystem) -> f64 {
    4.0 / (units.hbar * units.hbar)
}

/// `A′ = −4/ε²`.
pub fn constant_a_prime(epsilon: f64) -> Result<f64> {
    if epsilon == 0.0 || !epsilon.is_finite() {
        return Err(WaveError::Domain(format!("A' needs a finite nonzero epsilon, got {epsilon}")));
    }
    Ok(-4.0 / (epsilon * epsilon))
}

/// `B = (E² − E0²)/(E0² ħ² c²)`.
pub fn constant_b(energy: f64, units: &UnitSystem) -> f64 {
    let e0 = units.rest_energy;
    (energy * energy - e0 * e0) / (e0 * e0 * units.hbar * units.hbar * units.c * units.c)
}

/// Same form as [`constant_b`] with `ε = E − V` in place of `E`.
pub fn constant_d(epsilon: f64, units: &UnitSystem) -> f64 {
    constant_b(epsilon, units)
}

/// `B′ = −p²/(E0²(E0² + c²p²))`.
pub fn constant_b_prime(p: f64, units: &UnitSystem) -> f64 {
    let e0 = units.rest_energy;
    -p * p / (e0 * e0 * (e0 * e0 + units.c * units.c * p * p))
}

pub fn constant_d_prime(p: f64, units: &UnitSystem) -> f64 {
    constant_b_prime(p, units)
}

/// Residual of one calibration constant inserted back into the plane-wave
/// substitution it was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCheck {
    pub constant: String,
    pub value: f64,
    /// Substitution residual (units of 1/length²).
    pub residual: f64,
    /// Magnitude of the largest term of the substituted equation, for
    /// relative comparisons.
    pub scale: f64,
}

impl CalibrationCheck {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.residual.abs()
        } else {
            self.residual.abs() / self.scale
        }
    }
}

/// Inserts every constant into the free plane-wave substitution it calibrates:
/// `(ip/ħ)² + K·(coefficient) [·(−iω)²] = 0`.
pub fn calibration_residuals(p: f64, units: &UnitSystem) -> Result<Vec<CalibrationCheck>> {
    units.validate()?;
    let hb2 = units.hbar * units.hbar;
    let kinetic = -p * p / hb2;
    let m = units.mass;
    let e0 = units.rest_energy;
    let eps_nr = p * p / (2.0 * m);
    let eps_rel = crate::reference::klein_gordon_energy(p, e0, units.c);
    let mut out = Vec::with_capacity(6);
    let mut push = |name: &str, value: f64, term: f64, largest: f64| {
        out.push(CalibrationCheck {
            constant: name.into(),
            value,
            residual: kinetic + term,
            scale: kinetic.abs().max(term.abs()).max(largest),
        });
    };
    // `(E² − E0²)/(ħc)²` is a difference of two terms of this size.
    let rest_term = eps_rel * eps_rel / (hb2 * units.c * units.c);

    // n² = ((T − V) m)² / (2m(E − V)) with V = 0, T = E = ε reduces to mε/2.
    let n2 = 0.5 * m * eps_nr;
    let a = constant_a(units);
    push("A", a, a * n2, 0.0);
    if p != 0.0 {
        let ap = constant_a_prime(eps_nr)?;
        push("A'", ap, ap * n2 * (-eps_nr * eps_nr / hb2), 0.0);
    }
    let b = constant_b(eps_rel, units);
    push("B", b, b * e0 * e0, rest_term);
    let bp = constant_b_prime(p, units);
    push("B'", bp, bp * e0 * e0 * (-eps_rel * eps_rel / hb2), 0.0);
    let d = constant_d(eps_rel, units);
    push("D", d, d * e0 * e0, rest_term);
    let dp = constant_d_prime(p, units);
    push("D'", dp, dp * e0 * e0 * (-eps_rel * eps_rel / hb2), 0.0);
    Ok(out)
}

fn nr_factor(state: &PlaneWaveState) -> Result<f64> {
    let (e, v) = (state.energy, state.potential);
    if e == v {
        return Err(WaveError::SingularDenominator(format!("E = V = {e}")));
    }
    Ok((e - 2.0 * v).powi(2) / (e - v))
}

fn rel_guard(state: &PlaneWaveState, units: &UnitSystem) -> Result<f64> {
    let f = 1.0 + state.potential / units.rest_energy;
    if f <= 0.0 {
        return Err(WaveError::SingularDenominator(format!(
            "V = {} <= -E0 = {}",
            state.potential, -units.rest_energy
        )));
    }
    Ok(f)
}

/// `p²/2m − (E − 2V)²/(E − V)`.
pub fn residual_nr_stationary(state: &PlaneWaveState, units: &UnitSystem) -> Result<f64> {
    Ok(state.p * state.p / (2.0 * units.mass) - nr_factor(state)?)
}

/// `−ε²p²/(2mħ²) + (E − 2V)²/(E − V) · ε²/ħ²`.
pub fn residual_nr_timedep(state: &PlaneWaveState, units: &UnitSystem) -> Result<f64> {
    let eps2 = state.epsilon * state.epsilon;
    let hb2 = units.hbar * units.hbar;
    Ok(-eps2 * state.p * state.p / (2.0 * units.mass * hb2) + nr_factor(state)? * eps2 / hb2)
}

/// `c²p² − [(E − V)² − E0²](1 + V/E0)²`.
pub fn residual_rel_stationary(state: &PlaneWaveState, units: &UnitSystem) -> Result<f64> {
    let f = rel_guard(state, units)?;
    let e0 = units.rest_energy;
    let ev = state.energy - state.potential;
    Ok(units.c * units.c * state.p * state.p - (ev * ev - e0 * e0) * f * f)
}

/// `(E(1 + V/E0))² − (c²p² + E0²)`.
pub fn residual_rel_timedep(state: &PlaneWaveState, units: &UnitSystem) -> Result<f64> {
    let f = rel_guard(state, units)?;
    let e0 = units.rest_energy;
    Ok((state.energy * f).powi(2) - (units.c * units.c * state.p * state.p + e0 * e0))
}

/// `E − (±√(c²p² + E0²)) · E0/(E0 + V)`.
pub fn residual_spin_half(state: &PlaneWaveState, units: &UnitSystem, branch: Branch) -> Result<f64> {
    let f = rel_guard(state, units)?;
    let e = crate::reference::klein_gordon_energy(state.p, units.rest_energy, units.c);
    Ok(state.energy - branch.sign() * e / f)
}

/// `E − (±c p) · E0/(E0 + V)`.
pub fn residual_massless(state: &PlaneWaveState, units: &UnitSystem, branch: Branch) -> Result<f64> {
    let f = rel_guard(state, units)?;
    Ok(state.energy - branch.sign() * units.c * state.p / f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nat() -> UnitSystem {
        UnitSystem::natural()
    }

    #[test]
    fn constants() {
        assert_eq!(constant_a(&nat()), 4.0);
        assert_eq!(constant_a(&UnitSystem::new(2.0, 1.0, 1.0).unwrap()), 1.0);
        assert_eq!(constant_a(&UnitSystem::new(0.5, 1.0, 1.0).unwrap()), 16.0);
        assert_eq!(constant_a_prime(2.0).unwrap(), -1.0);
        assert_eq!(constant_a_prime(1.0).unwrap(), -4.0);
        assert_eq!(constant_a_prime(-2.0).unwrap(), -1.0);
        assert!(matches!(constant_a_prime(0.0), Err(WaveError::Domain(_))));
        let u4 = UnitSystem::new(1.0, 4.0, 1.0).unwrap();
        assert_eq!(constant_b(4.0, &u4), 0.0);
        assert_eq!(constant_b(5.0, &u4), 9.0 / 16.0);
        assert_eq!(constant_d(4.0, &u4), 0.0);
        assert_eq!(constant_b_prime(0.0, &nat()), 0.0);
        assert_eq!(constant_b_prime(1.0, &nat()), -0.5);
        assert_eq!(constant_d_prime(1.0, &nat()), -0.5);
    }

    #[test]
    fn nr_residuals() {
        let s = PlaneWaveState::free_nr(1.0, &nat());
        assert_eq!(residual_nr_stationary(&s, &nat()).unwrap(), 0.0);
        assert_eq!(residual_nr_timedep(&s, &nat()).unwrap(), 0.0);
        let v = s.with_potential(0.1);
        assert!((residual_nr_stationary(&v, &nat()).unwrap() - 0.275).abs() < 1e-15);
        assert!((residual_nr_timedep(&v, &nat()).unwrap() + 0.06875).abs() < 1e-15);
        let zero = PlaneWaveState {
            p: 0.0,
            epsilon: 0.0,
            energy: 0.0,
            potential: 0.0,
        };
        assert!(matches!(residual_nr_stationary(&zero, &nat()), Err(WaveError::SingularDenominator(_))));
        let p0 = PlaneWaveState {
            p: 0.0,
            epsilon: 0.7,
            energy: 0.5,
            potential: 0.1,
        };
        assert!((residual_nr_timedep(&p0, &nat()).unwrap() - 0.09 / 0.4 * 0.49).abs() < 1e-15);
    }

    #[test]
    fn relativistic_residuals() {
        let u = nat();
        let free = PlaneWaveState::free_rel(0.7, &u);
        assert!(residual_rel_stationary(&free, &u).unwrap().abs() < 1e-15);
        let rest = PlaneWaveState::free_rel(0.0, &u);
        assert_eq!(residual_rel_stationary(&rest, &u).unwrap(), 0.0);
        let shifted = PlaneWaveState {
            p: 1.0,
            epsilon: 0.0,
            energy: 1.0 + 5f64.sqrt() / 2.0,
            potential: 1.0,
        };
        assert!(residual_rel_stationary(&shifted, &u).unwrap().abs() < 1e-14);
        let bad = shifted.with_potential(-1.0);
        assert!(matches!(residual_rel_stationary(&bad, &u), Err(WaveError::SingularDenominator(_))));
        assert!(matches!(residual_rel_timedep(&bad, &u), Err(WaveError::SingularDenominator(_))));
        assert_eq!(residual_rel_timedep(&free, &u).unwrap(), free.energy.powi(2) - (0.49 + 1.0));
    }

    #[test]
    fn spin_half_and_massless_residuals() {
        let u = nat();
        for (b, e) in [(Branch::Positive, 1.0), (Branch::Negative, -1.0)] {
            let s = PlaneWaveState::free_rel(0.0, &u).with_energy(e);
            assert_eq!(residual_spin_half(&s, &u, b).unwrap(), 0.0);
            let half = s.with_potential(1.0).with_energy(e / 2.0);
            assert_eq!(residual_spin_half(&half, &u, b).unwrap(), 0.0);
            let m = PlaneWaveState {
                p: 3.0,
                epsilon: 0.0,
                energy: e * 1.5,
                potential: 1.0,
            };
            assert_eq!(residual_massless(&m, &u, b).unwrap(), 0.0);
        }
    }

    #[test]
    fn calibration_closes_for_free_states() {
        for p in [0.0, 0.3, 1.0, 7.5] {
            for c in calibration_residuals(p, &UnitSystem::new(0.7, 1.3, 2.1).unwrap()).unwrap() {
                assert!(c.relative() < 1e-13, "{} p={p}: {}", c.constant, c.relative());
            }
        }
    }
}
