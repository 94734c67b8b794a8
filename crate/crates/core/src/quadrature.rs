//! Adaptive Gauss–Kronrod integration, natural cubic splines and
//! symmetric-excision principal values.

use crate::error::{Result, WaveError};

// 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7–K15 panel: (Kronrod estimate, |K15 - G7|).
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Panels still open once this many evaluations are spent are accepted as is.
const EVALUATION_BUDGET: usize = 2_000_000;

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Adaptive bisection with G7–K15 panels until every panel meets its share of
/// `max(abs_tol, rel_tol·|I|)`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(WaveError::Domain(format!("integration limits [{a}, {b}] not finite")));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (whole, whole_err) = gk15(&f, a, b);
    let mut evaluations = 15;
    let mut done_value = 0.0;
    let mut done_err = 0.0;
    let mut stack = vec![(a, b, whole, whole_err, 0u32)];
    let total = (b - a).abs();
    let target = |est: f64| abs_tol.max(rel_tol * est.abs());
    while let Some((lo, hi, val, err, depth)) = stack.pop() {
        let share = (hi - lo).abs() / total;
        if err <= target(whole) * share
            || err <= 64.0 * f64::EPSILON * val.abs()
            || depth >= 50
            || evaluations >= EVALUATION_BUDGET
            || (hi - lo).abs() <= 64.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            done_value += val;
            done_err += err;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        evaluations += 30;
        stack.push((lo, mid, v1, e1, depth + 1));
        stack.push((mid, hi, v2, e2, depth + 1));
    }
    if !done_value.is_finite() {
        return Err(WaveError::Domain("integrand is not finite on the interval".into()));
    }
    Ok(Integral {
        value: done_value,
        error: done_err,
        evaluations,
    })
}

/// Integrates over consecutive panels `[breaks[i], breaks[i+1]]`; the global
/// tolerance comes from a one-rule-per-panel estimate of the total.
pub fn integrate_panels(f: impl Fn(f64) -> f64, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> Result<Integral> {
    let rough: f64 = breaks.windows(2).map(|w| gk15(&f, w[0], w[1]).0).sum();
    let total = (breaks[breaks.len() - 1] - breaks[0]).abs();
    let tol = abs_tol.max(rel_tol * rough.abs());
    let mut acc = Integral {
        value: 0.0,
        error: 0.0,
        evaluations: 15 * breaks.len().saturating_sub(1),
    };
    for w in breaks.windows(2) {
        let share = if total > 0.0 { (w[1] - w[0]).abs() / total } else { 1.0 };
        let r = integrate(&f, w[0], w[1], tol * share, 0.0)?;
        acc.value += r.value;
        acc.error += r.error;
        acc.evaluations += r.evaluations;
    }
    Ok(acc)
}

/// Natural cubic spline through `(x_i, y_i)` with strictly increasing `x`.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(WaveError::usage("spline needs at least two (x, y) pairs of equal length"));
        }
        if x.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(WaveError::usage("spline abscissae must be strictly increasing"));
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives (Thomas algorithm).
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            let mut sub = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                sub[i - 1] = h0;
                rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 1..k {
                let w = sub[i] / diag[i - 1];
                diag[i] -= w * (x[i + 1] - x[i]);
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - (x[i + 2] - x[i + 1]) * m[i + 2]) / diag[i];
            }
        }
        Ok(CubicSpline { x, y, m })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    /// Value at `t`; outside the knots the end cubics are extended.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = self.x.partition_point(|v| *v <= t).clamp(1, n - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Outcome of a principal-value computation by excision halving.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalValue {
    pub value: f64,
    /// Excised integrals for `delta0, delta0/2, ...`.
    pub history: Vec<f64>,
    pub final_delta: f64,
    pub converged: bool,
}

/// `PV ∫_a^b f` for simple poles `poles` inside `(a, b)`.
///
/// Each pole `p` is excised by `(p - δ, p + δ)`; the two sides are folded into
/// `∫_δ^R [f(p+t) + f(p-t)] dt` so the cancellation happens inside the
/// integrand. `δ` is halved until two successive values differ by at most
/// `rel_change` relative.
pub fn principal_value(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    poles: &[f64],
    panel_breaks: &[f64],
    rel_change: f64,
    max_halvings: usize,
) -> Result<PrincipalValue> {
    let mut poles: Vec<f64> = poles.iter().copied().filter(|p| *p > a && *p < b).collect();
    poles.sort_by(f64::total_cmp);
    poles.dedup();
    if poles.is_empty() {
        let breaks = merged_breaks(a, b, panel_breaks, &[]);
        let v = integrate_panels(&f, &breaks, 1e-14, 1e-12)?.value;
        return Ok(PrincipalValue {
            value: v,
            history: vec![v],
            final_delta: 0.0,
            converged: true,
        });
    }
    // Fold radius: half the distance to the nearest pole or limit.
    let mut radius = f64::INFINITY;
    for (i, &p) in poles.iter().enumerate() {
        radius = radius.min(p - a).min(b - p);
        if i > 0 {
            radius = radius.min(0.5 * (p - poles[i - 1]));
        }
    }
    radius *= 0.5;
    let mut outer_cuts = vec![a];
    for &p in &poles {
        outer_cuts.push(p - radius);
        outer_cuts.push(p + radius);
    }
    outer_cuts.push(b);
    let mut outer = 0.0;
    for pair in outer_cuts.chunks(2) {
        let breaks = merged_breaks(pair[0], pair[1], panel_breaks, &[]);
        outer += integrate_panels(&f, &breaks, 1e-14, 1e-12)?.value;
    }
    let folded = |p: f64, delta: f64| -> Result<f64> {
        let g = |t: f64| f(p + t) + f(p - t);
        // Panel edges at the mirrored knots keep the spline kinks on panel boundaries.
        let mut cuts: Vec<f64> = panel_breaks
            .iter()
            .map(|k| (k - p).abs())
            .filter(|t| *t > delta && *t < radius)
            .collect();
        cuts.push(delta);
        cuts.push(radius);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        Ok(integrate_panels(g, &cuts, 1e-13, 1e-10)?.value)
    };

    let mut delta = 0.5 * radius;
    let mut history = Vec::new();
    for _ in 0..=max_halvings {
        let mut v = outer;
        for &p in &poles {
            v += folded(p, delta)?;
        }
        history.push(v);
        let n = history.len();
        if n >= 2 {
            let change = (history[n - 1] - history[n - 2]).abs();
            if change <= rel_change * history[n - 1].abs().max(f64::MIN_POSITIVE) {
                return Ok(PrincipalValue {
                    value: v,
                    history,
                    final_delta: delta,
                    converged: true,
                });
            }
        }
        delta *= 0.5;
    }
    Ok(PrincipalValue {
        value: *history.last().expect("at least one evaluation"),
        history,
        final_delta: 2.0 * delta,
        converged: false,
    })
}

fn merged_breaks(a: f64, b: f64, knots: &[f64], extra: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = knots
        .iter()
        .chain(extra)
        .copied()
        .filter(|k| *k > a && *k < b)
        .collect();
    v.push(a);
    v.push(b);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_kronrod_polynomials_and_smooth() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((r.value - (63.0 / 6.0 - 9.0)).abs() < 1e-13);
        let s = integrate(f64::sin, 0.0, std::f64::consts::PI, 1e-14, 1e-14).unwrap();
        assert!((s.value - 2.0).abs() < 1e-13);
        let g = integrate(|x| (-x * x).exp(), -8.0, 8.0, 1e-14, 1e-14).unwrap();
        assert!((g.value - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn spline_reproduces_cubics_away_from_ends_and_interpolates() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|t| t.sin()).collect();
        let s = CubicSpline::natural(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((s.eval(*xi) - yi).abs() < 1e-15);
        }
        assert!((s.eval(1.55) - 1.55f64.sin()).abs() < 1e-5);
        // natural spline reproduces straight lines exactly
        let lin = CubicSpline::natural(x.clone(), x.iter().map(|t| 2.0 * t - 1.0).collect()).unwrap();
        assert!((lin.eval(2.345) - 3.69).abs() < 1e-13);
    }

    #[test]
    fn principal_value_of_simple_pole() {
        // PV ∫_0^3 1/(x-1) dx = ln 2
        let pv = principal_value(|x| 1.0 / (x - 1.0), 0.0, 3.0, &[1.0], &[], 1e-10, 60).unwrap();
        assert!(pv.converged);
        assert!((pv.value - 2f64.ln()).abs() < 1e-10, "{}", pv.value);
        // PV ∫_{-1}^{1} e^x / x dx = Ei(1) - Ei(-1) = 2 Shi(1)
        let pv = principal_value(|x| x.exp() / x, -1.0, 1.0, &[0.0], &[], 1e-12, 60).unwrap();
        assert!((pv.value - 2.0 * 1.057_250_875_375_728_5).abs() < 1e-10, "{}", pv.value);
    }

    #[test]
    fn principal_value_without_poles_is_plain_integral() {
        let pv = principal_value(|x| x * x, 0.0, 1.0, &[5.0], &[], 1e-10, 10).unwrap();
        assert!((pv.value - 1.0 / 3.0).abs() < 1e-14);
    }
}
