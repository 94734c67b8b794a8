//! Exact shooting for `ψ'' = −k_j² ψ` with piecewise-constant `k_j²`.
//!
//! Each region is crossed in closed form (trigonometric, hyperbolic or linear).
//! The state is renormalized by a positive factor at every interface, so the
//! sign of the matching function and the zero count are unaffected while
//! overflow in wide evanescent regions is avoided.

use std::f64::consts::PI;

use crate::error::{Result, WaveError};

/// Outer boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ends {
    /// Decay at ±∞; the two outer regions must be evanescent.
    Open,
    /// `ψ(a) = ψ(b) = 0`.
    Walls(f64, f64),
}

/// Region `j` spans `[edges[j-1], edges[j])`; `k2.len() == edges.len() + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseOde {
    pub edges: Vec<f64>,
    pub k2: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    x0: f64,
    x1: f64,
    k2: f64,
    psi: f64,
    dpsi: f64,
    /// natural log of the factor dropped by renormalization before `x0`
    log_scale: f64,
}

/// Values of `ψ(x0 + s)` relative to the segment start, as `(ψ, ψ', log factor)`.
fn advance(k2: f64, psi: f64, dpsi: f64, s: f64) -> (f64, f64, f64) {
    if k2 > 0.0 {
        let k = k2.sqrt();
        let (sn, cs) = (k * s).sin_cos();
        (psi * cs + dpsi / k * sn, -psi * k * sn + dpsi * cs, 0.0)
    } else if k2 < 0.0 {
        let kappa = (-k2).sqrt();
        let a = 0.5 * (psi + dpsi / kappa);
        let b = 0.5 * (psi - dpsi / kappa);
        let d = (-2.0 * kappa * s).exp();
        (a + b * d, kappa * (a - b * d), kappa * s)
    } else {
        (psi + dpsi * s, dpsi, 0.0)
    }
}

/// Zeros of the segment solution in `(0, len]`.
fn zeros_in(k2: f64, psi: f64, dpsi: f64, len: f64) -> usize {
    if len <= 0.0 {
        return 0;
    }
    if k2 > 0.0 {
        let k = k2.sqrt();
        // ψ = R cos(k s − φ)
        let phi = (dpsi / k).atan2(psi);
        let first = ((-phi - PI / 2.0) / PI).floor();
        let last = ((k * len - phi - PI / 2.0) / PI).floor();
        (last - first).max(0.0) as usize
    } else {
        let (end, _, _) = advance(k2, psi, dpsi, len);
        usize::from(psi != 0.0 && (end == 0.0 || (end > 0.0) != (psi > 0.0)))
    }
}

/// A single shot through all regions.
#[derive(Debug, Clone)]
pub struct Shot {
    segments: Vec<Segment>,
    ends: Ends,
    /// `ψ' + κ_R ψ` at the last edge (open) or `ψ(b)` (walls), renormalized.
    pub mismatch: f64,
    left_kappa: f64,
    right: (f64, f64, f64, f64),
}

impl PiecewiseOde {
    fn region_k2(&self, x: f64) -> f64 {
        self.k2[self.edges.partition_point(|e| *e <= x)]
    }

    /// Shoots from the left end. Returns `None` for open ends whose outer
    /// regions are not evanescent (no bound state possible there).
    pub fn shoot(&self, ends: Ends) -> Option<Shot> {
        let (start, stop, psi0, dpsi0, left_kappa) = match ends {
            Ends::Open => {
                let n = self.k2.len();
                if self.edges.is_empty() || !(self.k2[0] < 0.0) || !(self.k2[n - 1] < 0.0) {
                    return None;
                }
                let kl = (-self.k2[0]).sqrt();
                (self.edges[0], self.edges[self.edges.len() - 1], 1.0, kl, kl)
            }
            Ends::Walls(a, b) => (a, b, 0.0, 1.0, 0.0),
        };
        let mut cuts = vec![start];
        cuts.extend(self.edges.iter().copied().filter(|e| *e > start && *e < stop));
        cuts.push(stop);

        let mut segments = Vec::with_capacity(cuts.len());
        let (mut psi, mut dpsi, mut log_scale) = (psi0, dpsi0, 0.0);
        for w in cuts.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            if x1 <= x0 {
                continue;
            }
            let k2 = self.region_k2(0.5 * (x0 + x1));
            segments.push(Segment {
                x0,
                x1,
                k2,
                psi,
                dpsi,
                log_scale,
            });
            let (p1, d1, lg) = advance(k2, psi, dpsi, x1 - x0);
            let unit = k2.abs().sqrt().max(1.0 / (x1 - x0));
            let norm = p1.abs().max(d1.abs() / unit);
            if !(norm > 0.0 && norm.is_finite()) {
                return None;
            }
            psi = p1 / norm;
            dpsi = d1 / norm;
            log_scale += lg + norm.ln();
        }
        let (mismatch, right) = match ends {
            Ends::Open => {
                let kr = (-self.k2[self.k2.len() - 1]).sqrt();
                (dpsi + kr * psi, (stop, kr, psi, log_scale))
            }
            Ends::Walls(..) => (psi, (stop, 0.0, psi, log_scale)),
        };
        Some(Shot {
            segments,
            ends,
            mismatch,
            left_kappa,
            right: (right.0, right.1, right.2, right.3),
        })
    }
}

impl Shot {
    /// Zeros strictly inside the domain (open: between the outer edges; walls:
    /// in `(a, b)` excluding a zero within `1e-9` of the length at `b`).
    pub fn interior_zeros(&self) -> usize {
        let mut count = 0;
        let total = self.segments.last().map_or(0.0, |s| s.x1) - self.segments.first().map_or(0.0, |s| s.x0);
        let n = self.segments.len();
        for (i, s) in self.segments.iter().enumerate() {
            let mut len = s.x1 - s.x0;
            if i + 1 == n && matches!(self.ends, Ends::Walls(..)) {
                len -= 1e-9 * total;
            }
            count += zeros_in(s.k2, s.psi, s.dpsi, len);
        }
        count
    }

    /// Oscillation count: the number of eigenvalues below the energy at which
    /// the regions' `k²` were formed (walls: zeros in `(a, b)`; open: zeros on
    /// the whole line, including a possible zero in the right tail).
    pub fn oscillation_count(&self) -> usize {
        let mut count: usize = self
            .segments
            .iter()
            .map(|s| zeros_in(s.k2, s.psi, s.dpsi, s.x1 - s.x0))
            .sum();
        if let Ends::Open = self.ends {
            let (_, kr, psi, _) = self.right;
            // continuation ψ(s) = a e^{κs} + b e^{−κs} from the last edge
            let dpsi = self.mismatch - kr * psi;
            let a = 0.5 * (psi + dpsi / kr);
            let b = 0.5 * (psi - dpsi / kr);
            if a != 0.0 && (a > 0.0) != (b > 0.0) && b.abs() > a.abs() {
                count += 1;
            }
        }
        count
    }

    /// Samples the (unnormalized, but consistently scaled) solution at `xs`.
    /// Outside the shot interval the open-end decaying tails are used.
    pub fn sample(&self, xs: &[f64]) -> Vec<f64> {
        let max_log = self
            .segments
            .iter()
            .map(|s| s.log_scale + if s.k2 < 0.0 { (-s.k2).sqrt() * (s.x1 - s.x0) } else { 0.0 })
            .fold(self.right.3, f64::max);
        let first = self.segments[0];
        xs.iter()
            .map(|&x| {
                if x < first.x0 {
                    return match self.ends {
                        Ends::Open => (first.log_scale - max_log + self.left_kappa * (x - first.x0)).exp() * first.psi,
                        Ends::Walls(..) => 0.0,
                    };
                }
                let (xr, kr, psi_r, log_r) = self.right;
                if x > xr {
                    return match self.ends {
                        Ends::Open => psi_r * (log_r - max_log - kr * (x - xr)).exp(),
                        Ends::Walls(..) => 0.0,
                    };
                }
                let i = self.segments.partition_point(|s| s.x1 < x).min(self.segments.len() - 1);
                let s = self.segments[i];
                let (p, _, lg) = advance(s.k2, s.psi, s.dpsi, x - s.x0);
                p * (s.log_scale + lg - max_log).exp()
            })
            .collect()
    }
}

/// Sign-change scan plus bisection of a matching function over `[lo, hi]`,
/// skipping the `avoid` energies (splitting the scan there).
#[derive(Debug, Clone, PartialEq)]
pub struct RootScan {
    pub roots: Vec<f64>,
    /// Scan energies where the matching function was undefined.
    pub skipped: Vec<f64>,
}

pub fn scan_roots(
    f: impl Fn(f64) -> Option<f64>,
    lo: f64,
    hi: f64,
    samples: usize,
    avoid: &[f64],
) -> Result<RootScan> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(WaveError::config(format!("energy bracket [{lo}, {hi}] is empty or not finite")));
    }
    let samples = samples.max(2);
    let scale = lo.abs().max(hi.abs()).max(1e-300);
    let mut cuts: Vec<f64> = avoid.iter().copied().filter(|e| *e > lo && *e < hi).collect();
    cuts.sort_by(f64::total_cmp);
    let mut bounds = vec![lo];
    bounds.extend(cuts.iter().copied());
    bounds.push(hi);

    let mut roots = Vec::new();
    let mut skipped = Vec::new();
    let step = (hi - lo) / samples as f64;
    for w in bounds.windows(2) {
        let gap = 1e-9 * scale;
        let a = if cuts.contains(&w[0]) { w[0] + gap } else { w[0] };
        let b = if cuts.contains(&w[1]) { w[1] - gap } else { w[1] };
        if a >= b {
            continue;
        }
        if cuts.contains(&w[0]) {
            skipped.push(w[0]);
        }
        let m = (((b - a) / step).ceil() as usize).max(2);
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..=m {
            let e = if i == m { b } else { a + (b - a) * i as f64 / m as f64 };
            match f(e) {
                Some(v) if v.is_finite() => {
                    if v == 0.0 {
                        roots.push(e);
                    } else if let Some((pe, pv)) = prev {
                        if pv != 0.0 && (pv > 0.0) != (v > 0.0) {
                            roots.push(bisect_sign(&f, pe, e, pv));
                        }
                    }
                    prev = Some((e, v));
                }
                _ => {
                    skipped.push(e);
                    prev = None;
                }
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()));
    Ok(RootScan { roots, skipped })
}

fn bisect_sign(f: &impl Fn(f64) -> Option<f64>, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        match f(mid) {
            Some(v) if v == 0.0 => return mid,
            Some(v) if (v > 0.0) == (fa > 0.0) => {
                a = mid;
                fa = v;
            }
            Some(_) => b = mid,
            None => break,
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_modes_with_walls() {
        // ψ'' = −E ψ on [0, π]: roots at E = n²
        let f = |e: f64| {
            PiecewiseOde {
                edges: vec![],
                k2: vec![e],
            }
            .shoot(Ends::Walls(0.0, PI))
            .map(|s| s.mismatch)
        };
        let scan = scan_roots(f, 0.5, 26.0, 500, &[]).unwrap();
        assert_eq!(scan.roots.len(), 5);
        for (i, r) in scan.roots.iter().enumerate() {
            let n = (i + 1) as f64;
            assert!((r - n * n).abs() < 1e-12, "{r}");
            let shot = PiecewiseOde {
                edges: vec![],
                k2: vec![*r],
            }
            .shoot(Ends::Walls(0.0, PI))
            .unwrap();
            assert_eq!(shot.interior_zeros(), i);
        }
    }

    #[test]
    fn finite_well_matches_transcendental_roots() {
        // Schrödinger well depth 10, half width 1, ħ = m = 1: k² = 2(E − V)
        let ode = |e: f64| PiecewiseOde {
            edges: vec![-1.0, 1.0],
            k2: vec![2.0 * e, 2.0 * (e + 10.0), 2.0 * e],
        };
        let scan = scan_roots(|e| ode(e).shoot(Ends::Open).map(|s| s.mismatch), -9.999, -1e-9, 4000, &[]).unwrap();
        let want = crate::reference::finite_well_energies(10.0, 1.0, &crate::units::UnitSystem::natural());
        assert_eq!(scan.roots.len(), want.len());
        for (i, (a, b)) in scan.roots.iter().zip(&want).enumerate() {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            let shot = ode(*a).shoot(Ends::Open).unwrap();
            assert_eq!(shot.interior_zeros(), i);
            // the oscillation count just above a level includes it
            assert_eq!(ode(a + 1e-6).shoot(Ends::Open).unwrap().oscillation_count(), i + 1);
            assert_eq!(ode(a - 1e-6).shoot(Ends::Open).unwrap().oscillation_count(), i);
        }
    }

    #[test]
    fn sampled_solution_is_continuous_and_decays() {
        let e = crate::reference::finite_well_energies(10.0, 1.0, &crate::units::UnitSystem::natural())[0];
        let shot = PiecewiseOde {
            edges: vec![-1.0, 1.0],
            k2: vec![2.0 * e, 2.0 * (e + 10.0), 2.0 * e],
        }
        .shoot(Ends::Open)
        .unwrap();
        let xs: Vec<f64> = (0..=800).map(|i| -4.0 + i as f64 * 0.01).collect();
        let v = shot.sample(&xs);
        for w in v.windows(2) {
            assert!((w[1] - w[0]).abs() < 0.05 * v[400].abs());
        }
        assert!(v[0].abs() < 1e-3 * v[400].abs());
        assert!((v[0] - v[800]).abs() < 1e-6 * v[400].abs());
    }

    #[test]
    fn wide_barrier_does_not_overflow() {
        let ode = PiecewiseOde {
            edges: vec![0.0, 1.0, 500.0, 501.0],
            k2: vec![-1.0, 5.0, -4.0, 5.0, -1.0],
        };
        let shot = ode.shoot(Ends::Open).unwrap();
        assert!(shot.mismatch.is_finite());
        assert!(shot.sample(&[250.0, 500.5]).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn empty_bracket_reports_no_roots() {
        let scan = scan_roots(|e| Some(e * e + 1.0), -1.0, 1.0, 100, &[0.0]).unwrap();
        assert!(scan.roots.is_empty());
        assert_eq!(scan.skipped, vec![0.0]);
        assert!(scan_roots(|e| Some(e), 1.0, 1.0, 10, &[]).is_err());
    }
}
