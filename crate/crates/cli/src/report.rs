//! Run reports, their digests, and the error → exit-code contract.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use wavekit_core::WaveError;

use crate::config::{Equation, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_SINGULAR: i32 = 4;

pub fn exit_code(err: &WaveError) -> i32 {
    match err {
        WaveError::Config(_) | WaveError::Domain(_) | WaveError::Usage(_) | WaveError::InvalidScenario(_) | WaveError::OutOfScope(_) => {
            EXIT_CONFIG
        }
        WaveError::NonConvergence { .. } | WaveError::StateTracking { .. } | WaveError::NoRoot { .. } | WaveError::Stability { .. } => {
            EXIT_NONCONVERGENCE
        }
        WaveError::SingularRegion { .. }
        | WaveError::NonHyperbolic { .. }
        | WaveError::SingularCoefficient { .. }
        | WaveError::SingularDenominator(_) => EXIT_SINGULAR,
    }
}

/// Machine-readable failure attached to a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorObject {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
    #[serde(default)]
    pub details: Value,
}

impl ErrorObject {
    pub fn config(messages: &[String]) -> Self {
        ErrorObject {
            kind: "config".into(),
            message: messages.join("; "),
            exit_code: EXIT_CONFIG,
            details: json!({ "errors": messages }),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        ErrorObject {
            kind: "usage".into(),
            message: message.into(),
            exit_code: EXIT_CONFIG,
            details: Value::Null,
        }
    }
}

impl From<&WaveError> for ErrorObject {
    fn from(err: &WaveError) -> Self {
        let (kind, details) = match err {
            WaveError::Config(_) => ("config", Value::Null),
            WaveError::Domain(_) => ("domain", Value::Null),
            WaveError::Usage(_) => ("usage", Value::Null),
            WaveError::InvalidScenario(_) => ("invalid_scenario", Value::Null),
            WaveError::OutOfScope(_) => ("out_of_scope", Value::Null),
            WaveError::SingularDenominator(_) => ("singular_denominator", Value::Null),
            WaveError::SingularRegion { energy, set } => ("singular_region", json!({ "energy": energy, "set": set })),
            WaveError::NonHyperbolic { regions } => ("non_hyperbolic", json!({ "regions": regions })),
            WaveError::SingularCoefficient { locations } => ("singular_coefficient", json!({ "locations": locations })),
            WaveError::NonConvergence {
                iterations,
                last_residual,
                history,
            } => (
                "non_convergence",
                json!({ "iterations": iterations, "last_residual": last_residual, "history": history }),
            ),
            WaveError::StateTracking { expected, found } => ("state_tracking", json!({ "expected": expected, "found": found })),
            WaveError::NoRoot { lo, hi } => ("no_root", json!({ "lo": lo, "hi": hi })),
            WaveError::Stability { step, growth } => ("stability", json!({ "step": step, "growth": growth })),
        };
        ErrorObject {
            kind: kind.into(),
            message: err.to_string(),
            exit_code: exit_code(err),
            details,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub index: usize,
    pub energy: f64,
    pub node_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_consistency_residual: Option<f64>,
    /// Eigen-residual of the linear solve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

/// Field samples on the scenario grid; `re2`/`im2` hold a spinor's lower component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re2: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im2: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    #[serde(flatten)]
    pub field: Samples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub steps: usize,
    pub dt: f64,
    pub final_time: f64,
    pub initial_norm: f64,
    pub final_norm: f64,
    pub max_norm_drift: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_wave_energy_drift: Option<f64>,
    pub frame_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub table: String,
    pub p: f64,
    pub name: String,
    /// Constant value (calibration rows) or the energy the residual was evaluated at.
    pub value: f64,
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Spectrum {
        method: String,
        levels: Vec<Level>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        states: Option<Vec<Samples>>,
    },
    Trajectory {
        summary: TrajectorySummary,
        /// Grid coordinates shared by every frame.
        x: Vec<f64>,
        frames: Vec<Frame>,
    },
    Dispersion {
        rows: Vec<DispersionRow>,
    },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Spectrum { .. } => "spectrum",
            Payload::Trajectory { .. } => "trajectory",
            Payload::Dispersion { .. } => "dispersion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub artifact_version: String,
    pub command: String,
    pub equation: Equation,
    pub input_digest: String,
    pub scenario: ScenarioConfig,
    pub status: Status,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Payload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorObject>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, Value>,
    /// Excluded from [`RunReport::digest`].
    pub wall_time_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunReport {
    /// SHA-256 of the canonical JSON form without timing.
    pub fn digest(&self) -> String {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        if let Value::Object(map) = &mut v {
            map.remove("wall_time_s");
        }
        sha256_hex(v.to_string().as_bytes())
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        if let Value::Object(map) = &mut v {
            map.insert("report_digest".into(), Value::String(self.digest()));
        }
        serde_json::to_string_pretty(&v).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn first_energy(&self) -> Option<f64> {
        match &self.payload {
            Some(Payload::Spectrum { levels, .. }) => levels.first().map(|l| l.energy),
            _ => None,
        }
    }
}
