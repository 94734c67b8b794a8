use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};

/// Physical constants for one scenario.
///
/// `rest_energy` is `mass * c^2` for every constructor; the massless spin-1/2
/// sector keeps it as the reference energy in the `1 + V/E0` factor while the
/// mass term itself is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub hbar: f64,
    pub mass: f64,
    pub c: f64,
    pub rest_energy: f64,
}

impl UnitSystem {
    pub fn new(hbar: f64, mass: f64, c: f64) -> Result<Self> {
        let units = UnitSystem {
            hbar,
            mass,
            c,
            rest_energy: mass * c * c,
        };
        units.validate()?;
        Ok(units)
    }

    /// ħ = m = c = 1.
    pub fn natural() -> Self {
        UnitSystem {
            hbar: 1.0,
            mass: 1.0,
            c: 1.0,
            rest_energy: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hbar", self.hbar),
            ("mass", self.mass),
            ("c", self.c),
            ("rest_energy", self.rest_energy),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(WaveError::config(format!(
                    "unit `{name}` must be finite and > 0, got {v}"
                )));
            }
        }
        let e0 = self.mass * self.c * self.c;
        if (self.rest_energy - e0).abs() > 1e-12 * e0 {
            return Err(WaveError::config(format!(
                "rest energy {} differs from m c^2 = {e0}",
                self.rest_energy
            )));
        }
        Ok(())
    }

    /// ħ²/2m, the kinetic prefactor.
    pub fn kinetic_prefactor(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }

    pub fn hbar_c(&self) -> f64 {
        self.hbar * self.c
    }
}

impl Default for UnitSystem {
    fn default() -> Self {
        UnitSystem::natural()
    }
}
