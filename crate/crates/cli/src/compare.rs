//! Level-by-level comparison of two spectrum reports.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use wavekit_core::WaveError;

use crate::report::{Payload, RunReport, Samples};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDelta {
    pub index: usize,
    pub energy_a: f64,
    pub energy_b: f64,
    /// `energy_b − energy_a`
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap_deficit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub equation_a: String,
    pub equation_b: String,
    pub digest_a: String,
    pub digest_b: String,
    pub levels: Vec<LevelDelta>,
    pub max_abs_delta: f64,
    pub mean_abs_delta: f64,
    /// `1 − |⟨ψ_a|ψ_b⟩|` statistics; absent unless both reports carry states on the same grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_overlap_deficit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_overlap_deficit: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn spectrum(report: &RunReport, label: &str) -> Result<(Vec<f64>, Option<Vec<Samples>>), WaveError> {
    match &report.payload {
        Some(Payload::Spectrum { levels, states, .. }) => Ok((levels.iter().map(|l| l.energy).collect(), states.clone())),
        Some(other) => Err(WaveError::Usage(format!(
            "report {label} carries a {} payload; compare needs spectra",
            other.kind()
        ))),
        None => Err(WaveError::Usage(format!("report {label} has no payload (status error)"))),
    }
}

fn components(s: &Samples) -> Vec<Vec<Complex64>> {
    let join = |re: &[f64], im: &[f64]| re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)).collect();
    let mut out = vec![join(&s.re, &s.im)];
    if let (Some(re2), Some(im2)) = (&s.re2, &s.im2) {
        out.push(join(re2, im2));
    }
    out
}

/// `1 − |⟨a|b⟩| / (‖a‖‖b‖)` with trapezoid weights `w`.
fn overlap_deficit(a: &Samples, b: &Samples, w: &[f64]) -> Option<f64> {
    let (ca, cb) = (components(a), components(b));
    if ca.len() != cb.len() || ca.iter().chain(&cb).any(|c| c.len() != w.len()) {
        return None;
    }
    let mut ab = Complex64::new(0.0, 0.0);
    let (mut aa, mut bb) = (0.0, 0.0);
    for (x, y) in ca.iter().zip(&cb) {
        for i in 0..w.len() {
            ab += x[i].conj() * y[i] * w[i];
            aa += x[i].norm_sqr() * w[i];
            bb += y[i].norm_sqr() * w[i];
        }
    }
    if aa == 0.0 || bb == 0.0 {
        return None;
    }
    Some((1.0 - ab.norm() / (aa * bb).sqrt()).max(0.0))
}

fn weights(report: &RunReport) -> Option<(wavekit_core::Grid, Vec<f64>)> {
    let grid = report.scenario.grid.as_ref()?.build().ok()?;
    let w = grid.quadrature_weights();
    Some((grid, w))
}

pub fn compare_reports(a: &RunReport, b: &RunReport) -> Result<CompareReport, WaveError> {
    let (ea, sa) = spectrum(a, "A")?;
    let (eb, sb) = spectrum(b, "B")?;
    let mut warnings = Vec::new();
    if ea.len() != eb.len() {
        warnings.push(format!(
            "spectra differ in length ({} vs {}); comparing the first {}",
            ea.len(),
            eb.len(),
            ea.len().min(eb.len())
        ));
    }
    let grids = match (weights(a), weights(b)) {
        (Some((ga, w)), Some((gb, _))) if ga.same_as(&gb) => Some(w),
        _ => None,
    };
    let overlaps = match (&sa, &sb, &grids) {
        (Some(sa), Some(sb), Some(w)) => Some((sa, sb, w)),
        (Some(_), Some(_), None) => {
            warnings.push("states live on different grids; overlaps skipped".into());
            None
        }
        _ => None,
    };
    let levels: Vec<LevelDelta> = ea
        .iter()
        .zip(&eb)
        .enumerate()
        .map(|(i, (&x, &y))| LevelDelta {
            index: i,
            energy_a: x,
            energy_b: y,
            delta: y - x,
            overlap_deficit: overlaps.and_then(|(sa, sb, w)| overlap_deficit(sa.get(i)?, sb.get(i)?, w)),
        })
        .collect();
    let n = levels.len().max(1) as f64;
    let deficits: Vec<f64> = levels.iter().filter_map(|l| l.overlap_deficit).collect();
    Ok(CompareReport {
        equation_a: a.equation.to_string(),
        equation_b: b.equation.to_string(),
        digest_a: a.digest(),
        digest_b: b.digest(),
        max_abs_delta: levels.iter().map(|l| l.delta.abs()).fold(0.0, f64::max),
        mean_abs_delta: levels.iter().map(|l| l.delta.abs()).sum::<f64>() / n,
        max_overlap_deficit: (!deficits.is_empty()).then(|| deficits.iter().copied().fold(0.0, f64::max)),
        mean_overlap_deficit: (!deficits.is_empty()).then(|| deficits.iter().sum::<f64>() / deficits.len() as f64),
        levels,
        warnings,
    })
}
