//! Potential catalog and the singular sets of the modified equations.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::numgrid::{Grid, GridKind};

/// Declarative potential. Every shape except `coulomb` is evaluated at
/// `x - center`; the Coulomb shape lives on the radial half-line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(flatten)]
    pub shape: PotentialShape,
    #[serde(default)]
    pub center: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialShape {
    Free,
    /// `-depth` on the closed interval `|x - center| <= half_width`.
    SquareWell { depth: f64, half_width: f64 },
    /// `height` for `x - center >= edge`.
    Step { height: f64, edge: f64 },
    /// `height` on the closed interval `[left, right]`.
    Barrier { height: f64, left: f64, right: f64 },
    /// `m ω² x² / 2`; `mass` defaults to 1 when absent.
    Harmonic {
        omega: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass: Option<f64>,
    },
    /// `-strength / r`.
    Coulomb { strength: f64 },
    /// `values[i]` on `[breakpoints[i-1], breakpoints[i])`; one more value than breakpoints.
    PiecewiseConstant { breakpoints: Vec<f64>, values: Vec<f64> },
    /// Linear interpolation through `(points[i], values[i])`.
    Tabulated { points: Vec<f64>, values: Vec<f64> },
}

/// Region decomposition of a piecewise-constant potential, in absolute coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Piecewise {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl Piecewise {
    /// Index of the region containing `x` (left-closed).
    pub fn region_of(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|b| *b <= x)
    }
}

impl PotentialSpec {
    pub fn new(shape: PotentialShape) -> Self {
        PotentialSpec { shape, center: 0.0 }
    }

    pub fn free() -> Self {
        Self::new(PotentialShape::Free)
    }

    pub fn square_well(depth: f64, half_width: f64) -> Self {
        Self::new(PotentialShape::SquareWell { depth, half_width })
    }

    pub fn harmonic(omega: f64, mass: f64) -> Self {
        Self::new(PotentialShape::Harmonic {
            omega,
            mass: Some(mass),
        })
    }

    pub fn coulomb(strength: f64) -> Self {
        Self::new(PotentialShape::Coulomb { strength })
    }

    pub fn constant(value: f64) -> Self {
        Self::new(PotentialShape::PiecewiseConstant {
            breakpoints: vec![],
            values: vec![value],
        })
    }

    pub fn centered(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.shape {
            PotentialShape::Free => "free",
            PotentialShape::SquareWell { .. } => "square_well",
            PotentialShape::Step { .. } => "step",
            PotentialShape::Barrier { .. } => "barrier",
            PotentialShape::Harmonic { .. } => "harmonic",
            PotentialShape::Coulomb { .. } => "coulomb",
            PotentialShape::PiecewiseConstant { .. } => "piecewise_constant",
            PotentialShape::Tabulated { .. } => "tabulated",
        }
    }

    /// Checks the shape parameters; every problem found is listed.
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut errs = Vec::new();
        let mut finite = |name: &str, v: f64| {
            if !v.is_finite() {
                errs.push(format!("potential.{name} must be finite"));
            }
        };
        finite("center", self.center);
        match &self.shape {
            PotentialShape::Free => {}
            PotentialShape::SquareWell { depth, half_width } => {
                finite("depth", *depth);
                finite("half_width", *half_width);
                if !(*depth > 0.0) {
                    errs.push("potential.depth must be > 0".into());
                }
                if !(*half_width > 0.0) {
                    errs.push("potential.half_width must be > 0".into());
                }
            }
            PotentialShape::Step { height, edge } => {
                finite("height", *height);
                finite("edge", *edge);
            }
            PotentialShape::Barrier { height, left, right } => {
                finite("height", *height);
                finite("left", *left);
                finite("right", *right);
                if !(left < right) {
                    errs.push("potential.left must be < potential.right".into());
                }
            }
            PotentialShape::Harmonic { omega, mass } => {
                finite("omega", *omega);
                if !(*omega > 0.0) {
                    errs.push("potential.omega must be > 0".into());
                }
                if let Some(m) = mass {
                    if !(*m > 0.0 && m.is_finite()) {
                        errs.push("potential.mass must be > 0".into());
                    }
                }
            }
            PotentialShape::Coulomb { strength } => finite("strength", *strength),
            PotentialShape::PiecewiseConstant { breakpoints, values } => {
                if values.len() != breakpoints.len() + 1 {
                    errs.push(format!(
                        "potential.values needs {} entries for {} breakpoints, got {}",
                        breakpoints.len() + 1,
                        breakpoints.len(),
                        values.len()
                    ));
                }
                if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
                    errs.push("potential.breakpoints must be strictly increasing".into());
                }
                if breakpoints.iter().chain(values).any(|v| !v.is_finite()) {
                    errs.push("potential.breakpoints/values must be finite".into());
                }
            }
            PotentialShape::Tabulated { points, values } => {
                if points.len() < 2 || points.len() != values.len() {
                    errs.push(format!(
                        "potential.points and potential.values need equal length >= 2 (got {} and {})",
                        points.len(),
                        values.len()
                    ));
                }
                if points.windows(2).any(|w| !(w[0] < w[1])) {
                    errs.push("potential.points must be strictly increasing".into());
                }
                if points.iter().chain(values).any(|v| !v.is_finite()) {
                    errs.push("potential.points/values must be finite".into());
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// True when the potential is a finite set of constant regions.
    pub fn is_piecewise_constant(&self) -> bool {
        self.piecewise().is_some()
    }

    pub fn piecewise(&self) -> Option<Piecewise> {
        let c = self.center;
        let (breakpoints, values) = match &self.shape {
            PotentialShape::Free => (vec![], vec![0.0]),
            PotentialShape::SquareWell { depth, half_width } => {
                (vec![c - half_width, c + half_width], vec![0.0, -depth, 0.0])
            }
            PotentialShape::Step { height, edge } => (vec![c + edge], vec![0.0, *height]),
            PotentialShape::Barrier { height, left, right } => {
                (vec![c + left, c + right], vec![0.0, *height, 0.0])
            }
            PotentialShape::PiecewiseConstant { breakpoints, values } => {
                (breakpoints.iter().map(|b| b + c).collect(), values.clone())
            }
            _ => return None,
        };
        Some(Piecewise { breakpoints, values })
    }

    /// `V(x)`.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let u = x - self.center;
        Ok(match &self.shape {
            PotentialShape::Free => 0.0,
            PotentialShape::SquareWell { depth, half_width } => {
                if u.abs() <= *half_width {
                    -depth
                } else {
                    0.0
                }
            }
            PotentialShape::Step { height, edge } => {
                if u >= *edge {
                    *height
                } else {
                    0.0
                }
            }
            PotentialShape::Barrier { height, left, right } => {
                if u >= *left && u <= *right {
                    *height
                } else {
                    0.0
                }
            }
            PotentialShape::Harmonic { omega, mass } => 0.5 * mass.unwrap_or(1.0) * omega * omega * u * u,
            PotentialShape::Coulomb { strength } => {
                if !(x > 0.0) {
                    return Err(WaveError::Domain(format!(
                        "coulomb potential evaluated at r = {x} (needs r > 0)"
                    )));
                }
                -strength / x
            }
            PotentialShape::PiecewiseConstant { breakpoints, values } => {
                values[breakpoints.partition_point(|b| *b <= u)]
            }
            PotentialShape::Tabulated { points, values } => {
                let (first, last) = (points[0], points[points.len() - 1]);
                if u < first || u > last {
                    return Err(WaveError::Domain(format!(
                        "tabulated potential covers [{first}, {last}], evaluated at {u}"
                    )));
                }
                let j = points.partition_point(|p| *p <= u).clamp(1, points.len() - 1);
                let t = (u - points[j - 1]) / (points[j] - points[j - 1]);
                values[j - 1] + t * (values[j] - values[j - 1])
            }
        })
    }

    /// Samples `V` on every grid node. Coulomb shapes need a radial grid.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        if matches!(self.shape, PotentialShape::Coulomb { .. }) && grid.kind() != GridKind::Radial {
            return Err(WaveError::Domain("coulomb potential needs a radial grid".into()));
        }
        grid.points().into_iter().map(|x| self.evaluate(x)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SingularKind {
    /// `E = V(x)`
    EEqualsV,
    /// `E = 2V(x)`
    EEquals2V,
    /// `V(x) = -E0`
    VEqualsMinusE0 { rest_energy: f64 },
}

impl SingularKind {
    fn residual(&self, e: f64, v: f64) -> f64 {
        match self {
            SingularKind::EEqualsV => e - v,
            SingularKind::EEquals2V => e - 2.0 * v,
            SingularKind::VEqualsMinusE0 { rest_energy } => v + rest_energy,
        }
    }
}

/// Zeros of a singular denominator inside a grid's domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSet {
    #[serde(flatten)]
    pub kind: SingularKind,
    pub energy: f64,
    pub locations: Vec<f64>,
    /// Smallest distance between a location and a grid node.
    pub proximity: Option<f64>,
}

impl SingularSet {
    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

const SCAN_REFINEMENT: usize = 8;
const POSITION_TOL: f64 = 1e-12;

/// Finds every `x` in the grid's domain where the chosen denominator vanishes.
///
/// Piecewise-constant potentials are handled region by region: a region whose
/// value makes the denominator vanish is reported by its two (clipped) ends.
/// Other shapes are scanned for sign changes at eight times the grid density
/// and refined by bisection.
pub fn find_singular_set(spec: &PotentialSpec, energy: f64, kind: SingularKind, grid: &Grid) -> Result<SingularSet> {
    if !energy.is_finite() {
        return Err(WaveError::Domain(format!("energy {energy} is not finite")));
    }
    let (lo, hi) = (grid.x_min(), grid.x_max());
    let tol = 1e-9 * energy.abs().max(1.0);
    let mut locations = Vec::new();

    if let Some(pw) = spec.piecewise() {
        for (j, &v) in pw.values.iter().enumerate() {
            if kind.residual(energy, v).abs() > tol {
                continue;
            }
            let a = if j == 0 { lo } else { pw.breakpoints[j - 1].max(lo) };
            let b = if j == pw.breakpoints.len() { hi } else { pw.breakpoints[j].min(hi) };
            if a <= b {
                locations.push(a);
                if b > a {
                    locations.push(b);
                }
            }
        }
    } else {
        let f = |x: f64| spec.evaluate(x).map(|v| kind.residual(energy, v));
        let m = SCAN_REFINEMENT * (grid.len() - 1);
        let step = (hi - lo) / m as f64;
        let mut prev_x = lo;
        let mut prev_f = f(lo)?;
        if prev_f == 0.0 {
            locations.push(lo);
        }
        for i in 1..=m {
            let x = if i == m { hi } else { lo + i as f64 * step };
            let fx = f(x)?;
            if fx == 0.0 {
                locations.push(x);
            } else if prev_f != 0.0 && (fx > 0.0) != (prev_f > 0.0) {
                let root = bisect(&f, prev_x, x, prev_f)?;
                if kind.residual(energy, spec.evaluate(root)?).abs() <= tol {
                    locations.push(root);
                }
            }
            prev_x = x;
            prev_f = fx;
        }
    }

    let proximity = locations
        .iter()
        .map(|&x| {
            let i = ((x - grid.x_min()) / grid.spacing()).round().clamp(0.0, (grid.len() - 1) as f64);
            (x - grid.x(i as usize)).abs()
        })
        .reduce(f64::min);
    Ok(SingularSet {
        kind,
        energy,
        locations,
        proximity,
    })
}

fn bisect(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, mut fa: f64) -> Result<f64> {
    let mut fb = f(b)?;
    while (b - a).abs() > POSITION_TOL {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
            fb = fm;
        }
    }
    Ok(if fa.abs() <= fb.abs() { a } else { b })
}
