//! Modified non-relativistic equations.
//!
//! Stationary form: `[-ħ²/2m ∇² + W(E)] ψ = E ψ` with the energy-dependent
//! effective potential `W(E, x) = 3V − V²/(E − V)`. Time-dependent form: the
//! wave equation `ψ_tt = s(x) ∇²ψ`, `s = (ε²/2m)(E − V)/(E − 2V)²`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::linalg::BandedSym;
use crate::numgrid::{laplacian_for, BandedOperator, Discretization, Grid, WaveField};
use crate::potentials::{find_singular_set, Piecewise, PotentialSpec, SingularKind, SingularSet};
use crate::quadrature::{integrate_panels, principal_value, CubicSpline};
use crate::reference::{fix_sign, grid_norm, Trajectory};
use crate::shooting::{scan_roots, Ends, PiecewiseOde};
use crate::units::UnitSystem;

/// What to do where `|E − V(x)|` falls below the floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardPolicy {
    #[default]
    Reject,
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SingularGuard {
    #[serde(default)]
    pub policy: GuardPolicy,
    /// Absolute floor for `|E − V|`; `None` means `1e-6` of the energy scale.
    #[serde(default)]
    pub floor: Option<f64>,
}

impl SingularGuard {
    pub fn clamp(floor: Option<f64>) -> Self {
        SingularGuard {
            policy: GuardPolicy::Clamp,
            floor,
        }
    }

    fn floor_for(&self, energy: f64, values: &[f64]) -> f64 {
        self.floor.unwrap_or_else(|| {
            let scale = values.iter().fold(energy.abs(), |m, v| m.max(v.abs()));
            1e-6 * scale.max(f64::MIN_POSITIVE)
        })
    }
}

/// `3V − V²/(E − V)` for one value, with the removable cases `V = 0` and `E = 0`.
fn w_value(energy: f64, v: f64, floor: f64, clamp: bool) -> Option<f64> {
    if v == 0.0 {
        return Some(0.0);
    }
    if energy == 0.0 {
        return Some(4.0 * v);
    }
    let mut d = energy - v;
    if d.abs() < floor {
        if !clamp {
            return None;
        }
        d = if d < 0.0 { -floor } else { floor };
    }
    Some(3.0 * v - v * v / d)
}

/// Samples `W(E, x)` on the grid.
pub fn effective_potential(potential: &PotentialSpec, energy: f64, grid: &Grid, guard: &SingularGuard) -> Result<Vec<f64>> {
    if !energy.is_finite() {
        return Err(WaveError::Domain(format!("energy {energy} is not finite")));
    }
    let v = potential.sample(grid)?;
    let floor = guard.floor_for(energy, &v);
    let clamp = guard.policy == GuardPolicy::Clamp;
    if !clamp && energy != 0.0 {
        let mut set = find_singular_set(potential, energy, SingularKind::EEqualsV, grid)?;
        // near-misses not already explained by a crossing within one cell
        let h = grid.spacing();
        let crossings = set.locations.clone();
        for (i, &vi) in v.iter().enumerate() {
            let x = grid.x(i);
            if vi != 0.0 && (energy - vi).abs() < floor && !crossings.iter().any(|c| (c - x).abs() <= h) {
                set.locations.push(x);
            }
        }
        if !set.is_empty() {
            set.locations.sort_by(f64::total_cmp);
            set.locations.dedup();
            return Err(WaveError::SingularRegion { energy, set });
        }
    }
    Ok(v.iter()
        .map(|&vi| w_value(energy, vi, floor, clamp).unwrap_or(f64::NAN))
        .collect())
}

/// The linear problem `-ħ²/2m ∇² + W(E)` at a fixed energy parameter.
#[derive(Debug, Clone)]
pub struct EffectiveProblem {
    pub laplacian: BandedOperator,
    /// `ħ²/2m`
    pub kinetic: f64,
    pub potential: PotentialSpec,
    pub energy: f64,
    pub w: Vec<f64>,
    /// Empty unless the clamp policy let a singular energy through.
    pub singular: SingularSet,
}

impl EffectiveProblem {
    pub fn new(
        grid: &Grid,
        potential: &PotentialSpec,
        energy: f64,
        guard: &SingularGuard,
        disc: Discretization,
        units: &UnitSystem,
    ) -> Result<Self> {
        let w = effective_potential(potential, energy, grid, guard)?;
        let singular = if energy == 0.0 {
            SingularSet {
                kind: SingularKind::EEqualsV,
                energy,
                locations: Vec::new(),
                proximity: None,
            }
        } else {
            find_singular_set(potential, energy, SingularKind::EEqualsV, grid)?
        };
        Ok(EffectiveProblem {
            laplacian: laplacian_for(grid, disc)?,
            kinetic: units.kinetic_prefactor(),
            potential: potential.clone(),
            energy,
            w,
            singular,
        })
    }

    pub fn matrix(&self) -> Result<BandedSym> {
        let n = self.laplacian.grid().active().len();
        self.laplacian.restrict(-self.kinetic, &self.w, vec![1.0; n])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    FixedPoint,
    Shooting,
    /// Sign-count scan of a grid operator.
    GridScan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedEigenResult {
    pub energy: f64,
    pub state: WaveField,
    /// Number of linear solves at the iterate (fixed point) or 1 (shooting).
    pub iterations: usize,
    pub self_consistency_residual: f64,
    pub node_count: usize,
    pub method: SolveMethod,
    /// `|eig(E_k) − E_k|` per iteration.
    pub history: Vec<f64>,
}

/// Inner eigensolver for the fixed-point iteration.
pub trait LinearSpectrum {
    /// Eigenvalue of `H(E)` whose eigenfunction has `nodes` nodes.
    fn eigenvalue(&self, energy: f64, nodes: usize) -> Result<f64>;
    /// Number of eigenvalues of `H(E)` below `lambda`.
    fn count_below(&self, energy: f64, lambda: f64) -> Result<usize>;
    /// Normalized eigenfunction and its node count.
    fn state(&self, energy: f64, nodes: usize) -> Result<(WaveField, usize)>;
    /// Energies at which `W(E, ·)` blows up somewhere (finite list, may be empty).
    fn singular_energies(&self) -> Vec<f64>;
}

/// Finite-difference inner solver on a grid.
#[derive(Debug, Clone)]
pub struct GridModel {
    grid: Grid,
    potential: PotentialSpec,
    units: UnitSystem,
    guard: SingularGuard,
    disc: Discretization,
}

/// Eigenvector indices tried around the node count before giving up.
const TRACKING_WINDOW: usize = 3;

impl GridModel {
    pub fn new(grid: &Grid, potential: &PotentialSpec, units: &UnitSystem, guard: SingularGuard, disc: Discretization) -> Result<Self> {
        units.validate()?;
        potential.sample(grid)?;
        Ok(GridModel {
            grid: *grid,
            potential: potential.clone(),
            units: *units,
            guard,
            disc,
        })
    }

    fn problem(&self, energy: f64) -> Result<EffectiveProblem> {
        EffectiveProblem::new(&self.grid, &self.potential, energy, &self.guard, self.disc, &self.units)
    }

    fn tracked(&self, energy: f64, nodes: usize) -> Result<(f64, Vec<f64>)> {
        let matrix = self.problem(energy)?.matrix()?;
        let n = matrix.len();
        let mut found = None;
        for offset in 0..=TRACKING_WINDOW {
            for index in [nodes.checked_add(offset), nodes.checked_sub(offset)].into_iter().flatten() {
                if index >= n || (offset == 0 && found.is_some()) {
                    continue;
                }
                let (lambda, mut v) = matrix.eigenpairs(&[index])?.remove(0);
                fix_sign(&mut v);
                let count = crate::numgrid::count_sign_changes(&self.grid.lift(&v));
                if count == nodes {
                    return Ok((lambda, v));
                }
                found.get_or_insert(count);
            }
        }
        Err(WaveError::StateTracking {
            expected: nodes,
            found: found.unwrap_or(0),
        })
    }
}

impl LinearSpectrum for GridModel {
    fn eigenvalue(&self, energy: f64, nodes: usize) -> Result<f64> {
        Ok(self.tracked(energy, nodes)?.0)
    }

    fn count_below(&self, energy: f64, lambda: f64) -> Result<usize> {
        Ok(self.problem(energy)?.matrix()?.count_below(lambda))
    }

    fn state(&self, energy: f64, nodes: usize) -> Result<(WaveField, usize)> {
        let (_, v) = self.tracked(energy, nodes)?;
        let state = WaveField::from_real(&self.grid, &self.grid.lift(&v))?.normalized();
        let count = state.node_count();
        Ok((state, count))
    }

    fn singular_energies(&self) -> Vec<f64> {
        self.potential.piecewise().map(|p| p.values).unwrap_or_default()
    }
}

/// Exact inner solver for piecewise-constant potentials (transfer matrices);
/// states are sampled on `grid` for output.
#[derive(Debug, Clone)]
pub struct PiecewiseModel {
    pieces: Piecewise,
    ends: Ends,
    grid: Grid,
    kinetic: f64,
    guard: SingularGuard,
}

impl PiecewiseModel {
    pub fn new(potential: &PotentialSpec, ends: Ends, grid: &Grid, units: &UnitSystem, guard: SingularGuard) -> Result<Self> {
        units.validate()?;
        let pieces = potential
            .piecewise()
            .ok_or_else(|| WaveError::config(format!("{} potential is not piecewise constant", potential.name())))?;
        if let Ends::Walls(a, b) = ends {
            if !(a < b) {
                return Err(WaveError::config(format!("walls [{a}, {b}] are empty")));
            }
        }
        Ok(PiecewiseModel {
            pieces,
            ends,
            grid: *grid,
            kinetic: units.kinetic_prefactor(),
            guard,
        })
    }

    /// Region values that the shot actually crosses.
    fn relevant(&self) -> Vec<f64> {
        match self.ends {
            Ends::Open => self.pieces.values.clone(),
            Ends::Walls(a, b) => {
                let bp = &self.pieces.breakpoints;
                (0..self.pieces.values.len())
                    .filter(|&j| {
                        let lo = if j == 0 { f64::NEG_INFINITY } else { bp[j - 1] };
                        let hi = if j == bp.len() { f64::INFINITY } else { bp[j] };
                        hi > a && lo < b
                    })
                    .map(|j| self.pieces.values[j])
                    .collect()
            }
        }
    }

    fn w(&self, energy: f64) -> Result<Vec<f64>> {
        let floor = self.guard.floor_for(energy, &self.pieces.values);
        let clamp = self.guard.policy == GuardPolicy::Clamp;
        let relevant = self.relevant();
        let mut bad = Vec::new();
        let w: Vec<f64> = self
            .pieces
            .values
            .iter()
            .map(|&v| match w_value(energy, v, floor, clamp) {
                Some(w) => w,
                None => {
                    if relevant.contains(&v) {
                        bad.push(v);
                    }
                    f64::NAN
                }
            })
            .collect();
        if !bad.is_empty() {
            let grid = match self.ends {
                Ends::Walls(a, b) => Grid::line(a, b, crate::numgrid::MIN_POINTS, crate::numgrid::Boundary::Dirichlet)?,
                Ends::Open => self.grid,
            };
            let spec = PotentialSpec::new(crate::potentials::PotentialShape::PiecewiseConstant {
                breakpoints: self.pieces.breakpoints.clone(),
                values: self.pieces.values.clone(),
            });
            let set = find_singular_set(&spec, energy, SingularKind::EEqualsV, &grid)?;
            return Err(WaveError::SingularRegion { energy, set });
        }
        Ok(w)
    }

    fn ode(&self, w: &[f64], lambda: f64) -> PiecewiseOde {
        PiecewiseOde {
            edges: self.pieces.breakpoints.clone(),
            k2: w.iter().map(|wj| (lambda - wj) / self.kinetic).collect(),
        }
    }

    fn count_with(&self, w: &[f64], lambda: f64) -> Result<usize> {
        self.ode(w, lambda)
            .shoot(self.ends)
            .map(|s| s.oscillation_count())
            .ok_or_else(|| WaveError::Domain(format!("λ = {lambda} lies in the continuum")))
    }

    fn level(&self, w: &[f64], energy: f64, nodes: usize) -> Result<f64> {
        self.level_bracket(w, energy, nodes).map(|(lo, hi)| 0.5 * (lo + hi))
    }

    /// Final bisection interval: `count(lo) <= nodes < count(hi)`.
    fn level_bracket(&self, w: &[f64], energy: f64, nodes: usize) -> Result<(f64, f64)> {
        let relevant: Vec<f64> = match self.ends {
            Ends::Open => w.to_vec(),
            Ends::Walls(..) => {
                let keep = self.relevant();
                w.iter()
                    .zip(&self.pieces.values)
                    .filter(|(_, v)| keep.contains(v))
                    .map(|(wj, _)| *wj)
                    .collect()
            }
        };
        let w_min = relevant.iter().copied().fold(f64::INFINITY, f64::min);
        let w_max = relevant.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lo = w_min - 1.0;
        let hi = match self.ends {
            Ends::Open => {
                let t = w[0].min(w[w.len() - 1]);
                let below = t - 1e-12 * t.abs().max(1.0);
                if self.count_with(w, below)? <= nodes {
                    return Err(WaveError::NoRoot { lo: energy, hi: energy });
                }
                below
            }
            Ends::Walls(a, b) => {
                let k = (nodes + 1) as f64 * std::f64::consts::PI / (b - a);
                w_max + self.kinetic * k * k + 1.0
            }
        };
        let mut hi = hi;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_with(w, mid)? > nodes {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok((lo, hi))
    }
}

impl LinearSpectrum for PiecewiseModel {
    fn eigenvalue(&self, energy: f64, nodes: usize) -> Result<f64> {
        let w = self.w(energy)?;
        self.level(&w, energy, nodes)
    }

    fn count_below(&self, energy: f64, lambda: f64) -> Result<usize> {
        self.count_with(&self.w(energy)?, lambda)
    }

    fn state(&self, energy: f64, nodes: usize) -> Result<(WaveField, usize)> {
        let w = self.w(energy)?;
        let (lo, hi) = self.level_bracket(&w, energy, nodes)?;
        // Between walls the shot runs into evanescent regions in the growing
        // direction, so the zero at `b` is only located to ~eps·e^{2κL}. Just
        // below the level the oscillation count is exactly the node count.
        let lambda = match self.ends {
            Ends::Open => 0.5 * (lo + hi),
            Ends::Walls(..) => lo,
        };
        let shot = self
            .ode(&w, lambda)
            .shoot(self.ends)
            .ok_or_else(|| WaveError::Domain(format!("λ = {lambda} lies in the continuum")))?;
        let found = match self.ends {
            Ends::Open => shot.interior_zeros(),
            Ends::Walls(..) => shot.oscillation_count(),
        };
        if found != nodes {
            return Err(WaveError::StateTracking { expected: nodes, found });
        }
        Ok((sampled_state(&self.grid, &shot.sample(&self.grid.points()))?, found))
    }

    fn singular_energies(&self) -> Vec<f64> {
        self.relevant().into_iter().filter(|v| *v != 0.0).collect()
    }
}

fn sampled_state(grid: &Grid, values: &[f64]) -> Result<WaveField> {
    let mut v = values.to_vec();
    let active = grid.active();
    for (i, x) in v.iter_mut().enumerate() {
        if !active.contains(&i) {
            *x = 0.0;
        }
    }
    fix_sign(&mut v);
    let field = WaveField::from_real(grid, &v)?;
    if field.norm() == 0.0 {
        return Err(WaveError::Domain("sampled state vanishes on the grid".into()));
    }
    Ok(field.normalized())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    /// `E ← E + λ (eig − E) / (1 − eig')`, safeguarded by bisection once bracketed.
    #[default]
    Newton,
    /// `E ← (1 − λ) E + λ eig`.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub relaxation: Relaxation,
    pub guard: SingularGuard,
    pub discretization: Discretization,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: 1e-10,
            max_iter: 200,
            damping: 1.0,
            relaxation: Relaxation::Newton,
            guard: SingularGuard::default(),
            discretization: Discretization::default(),
        }
    }
}

impl FixedPointOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(WaveError::config(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(WaveError::config("max_iter must be >= 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(WaveError::config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        Ok(())
    }
}

/// Self-consistent `E* = eig_n(H(E*))` for the state with `nodes` nodes.
///
/// `bracket = (above, below)` are energies where `eig − E` is known to be
/// positive (or the state unbound) and negative; it enables the bisection
/// safeguard from the first step.
pub fn fixed_point<M: LinearSpectrum>(
    model: &M,
    nodes: usize,
    e_init: f64,
    bracket: Option<(f64, f64)>,
    opts: &FixedPointOptions,
) -> Result<ModifiedEigenResult> {
    opts.validate()?;
    if !e_init.is_finite() {
        return Err(WaveError::config(format!("initial energy {e_init} is not finite")));
    }
    let singular = model.singular_energies();
    let (mut above, mut below) = match bracket {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };
    let mut e = e_init;
    let mut history = Vec::new();
    for k in 1..=opts.max_iter {
        let lambda = match model.eigenvalue(e, nodes) {
            Ok(l) => l,
            Err(WaveError::NoRoot { .. }) if above.is_some() && below.is_some() => {
                above = Some(e);
                history.push(f64::NAN);
                e = 0.5 * (above.unwrap() + below.unwrap());
                continue;
            }
            Err(err) => return Err(err),
        };
        let g = lambda - e;
        history.push(g.abs());
        if g.abs() <= opts.tol {
            let (state, node_count) = model.state(e, nodes)?;
            return Ok(ModifiedEigenResult {
                energy: e,
                state,
                iterations: k,
                self_consistency_residual: g.abs(),
                node_count,
                method: SolveMethod::FixedPoint,
                history,
            });
        }
        if g > 0.0 {
            above = Some(e);
        } else {
            below = Some(e);
        }
        let mut next = match opts.relaxation {
            Relaxation::Plain => e + opts.damping * g,
            Relaxation::Newton => {
                let slope = derivative(model, e, nodes, &singular);
                match slope {
                    Some(d) if (1.0 - d).abs() > 1e-12 => e + opts.damping * g / (1.0 - d),
                    _ => e + opts.damping * g,
                }
            }
        };
        if opts.relaxation == Relaxation::Newton {
            if let (Some(a), Some(b)) = (above, below) {
                let (lo, hi) = (a.min(b), a.max(b));
                if !(next > lo && next < hi) {
                    next = 0.5 * (a + b);
                }
            }
        }
        // never step across an energy where W blows up
        for &s in &singular {
            if (e < s && next >= s) || (e > s && next <= s) {
                next = e + 0.5 * (s - e);
            }
        }
        if !next.is_finite() {
            break;
        }
        e = next;
    }
    Err(WaveError::NonConvergence {
        iterations: opts.max_iter,
        last_residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

fn derivative<M: LinearSpectrum>(model: &M, e: f64, nodes: usize, singular: &[f64]) -> Option<f64> {
    let mut delta = 1e-6 * e.abs().max(1e-3);
    if let Some(gap) = singular.iter().map(|s| (s - e).abs()).reduce(f64::min) {
        delta = delta.min(0.25 * gap);
    }
    let up = model.eigenvalue(e + delta, nodes).ok()?;
    let down = model.eigenvalue(e - delta, nodes).ok()?;
    Some((up - down) / (2.0 * delta))
}

/// Grid fixed point for the state with `state_index` nodes.
pub fn solve_stationary_fixed_point(
    grid: &Grid,
    potential: &PotentialSpec,
    state_index: usize,
    e_init: f64,
    opts: &FixedPointOptions,
    units: &UnitSystem,
) -> Result<ModifiedEigenResult> {
    let model = GridModel::new(grid, potential, units, opts.guard, opts.discretization)?;
    fixed_point(&model, state_index, e_init, None, opts)
}

/// States found by a scan over an energy window.
#[derive(Debug, Clone, PartialEq)]
pub struct StateScan {
    pub states: Vec<ModifiedEigenResult>,
    /// Scan energies that were singular or otherwise undefined.
    pub skipped: Vec<f64>,
}

/// Locates fixed points in `[lo, hi]` from jumps of `N(E)`, the number of
/// eigenvalues of `H(E)` below `E`, then refines each one.
pub fn discover_fixed_points<M: LinearSpectrum>(
    model: &M,
    lo: f64,
    hi: f64,
    samples: usize,
    opts: &FixedPointOptions,
) -> Result<StateScan> {
    if !(lo < hi) {
        return Err(WaveError::config(format!("energy window [{lo}, {hi}] is empty")));
    }
    let samples = samples.max(2);
    let mut skipped = Vec::new();
    let mut prev: Option<(f64, usize)> = None;
    let mut states: Vec<ModifiedEigenResult> = Vec::new();
    let singular = model.singular_energies();
    for i in 0..=samples {
        let e = lo + (hi - lo) * i as f64 / samples as f64;
        let crosses = |a: f64| singular.iter().any(|s| (a < *s && e >= *s) || (a >= *s && e < *s));
        let count = match model.count_below(e, e) {
            Ok(c) => c,
            Err(_) => {
                skipped.push(e);
                prev = None;
                continue;
            }
        };
        if let Some((pe, pc)) = prev {
            if !crosses(pe) && pc.abs_diff(count) == 1 {
                let (nodes, bracket) = if count > pc { (pc, (pe, e)) } else { (count, (e, pe)) };
                let found = fixed_point(model, nodes, 0.5 * (pe + e), Some(bracket), opts)?;
                states.push(found);
            }
        }
        prev = Some((e, count));
    }
    states.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(StateScan { states, skipped })
}

/// `k²(E)` per region for the modified stationary equation.
fn modified_k2(energy: f64, values: &[f64], kinetic: f64) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            if v == 0.0 {
                energy / kinetic
            } else {
                (energy - 2.0 * v).powi(2) / ((energy - v) * kinetic)
            }
        })
        .collect()
}

pub const SHOOTING_SAMPLES: usize = 2000;

/// Every root of the modified matching function inside `bracket`.
pub fn solve_stationary_shooting(
    potential: &PotentialSpec,
    bracket: (f64, f64),
    ends: Ends,
    grid: &Grid,
    units: &UnitSystem,
) -> Result<StateScan> {
    solve_stationary_shooting_with(potential, bracket, ends, grid, units, SHOOTING_SAMPLES)
}

pub fn solve_stationary_shooting_with(
    potential: &PotentialSpec,
    bracket: (f64, f64),
    ends: Ends,
    grid: &Grid,
    units: &UnitSystem,
    samples: usize,
) -> Result<StateScan> {
    units.validate()?;
    let pieces = potential
        .piecewise()
        .ok_or_else(|| WaveError::config(format!("shooting needs a piecewise-constant potential, got {}", potential.name())))?;
    let kinetic = units.kinetic_prefactor();
    let ode = |e: f64| PiecewiseOde {
        edges: pieces.breakpoints.clone(),
        k2: modified_k2(e, &pieces.values, kinetic),
    };
    let avoid: Vec<f64> = pieces.values.iter().copied().filter(|v| *v != 0.0).collect();
    let matching = |e: f64| {
        if avoid.contains(&e) {
            return None;
        }
        ode(e).shoot(ends).map(|s| s.mismatch)
    };
    let (lo, hi) = bracket;
    let scan = scan_roots(matching, lo, hi, samples, &avoid)?;
    if scan.roots.is_empty() {
        return Err(WaveError::NoRoot { lo, hi });
    }
    let mut states = Vec::with_capacity(scan.roots.len());
    for e in scan.roots {
        let Some(shot) = ode(e).shoot(ends) else { continue };
        let state = sampled_state(grid, &shot.sample(&grid.points()))?;
        states.push(ModifiedEigenResult {
            energy: e,
            state,
            iterations: 1,
            self_consistency_residual: 0.0,
            node_count: shot.interior_zeros(),
            method: SolveMethod::Shooting,
            history: Vec::new(),
        });
    }
    // The self-consistency residual is measured with the exact linear solver.
    let model = PiecewiseModel::new(potential, ends, grid, units, SingularGuard::default())?;
    for s in &mut states {
        if let Ok(l) = model.eigenvalue(s.energy, s.node_count) {
            s.self_consistency_residual = (l - s.energy).abs();
        }
    }
    Ok(StateScan {
        states,
        skipped: scan.skipped,
    })
}

const RADIAL_MIRROR: usize = 32;

/// First-order size of the additional term `W − V` against a reference state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditionalTermReport {
    pub first_order_shift: f64,
    #[serde(rename = "minus_2V_part")]
    pub minus_2v_part: f64,
    pub pv_part: f64,
    pub pv_flag: bool,
    /// `|first_order_shift / E_ref|`
    pub ratio: f64,
    pub poles: Vec<f64>,
    pub pv_history: Vec<f64>,
    pub pv_converged: bool,
}

/// `⟨ψ|−2V|ψ⟩` and `PV ⟨ψ|V²/(E − V)|ψ⟩` with `|ψ|²` interpolated by a cubic spline.
pub fn additional_term_report(psi: &WaveField, e_ref: f64, potential: &PotentialSpec, units: &UnitSystem) -> Result<AdditionalTermReport> {
    units.validate()?;
    let grid = psi.grid;
    let norm2 = psi.norm_sqr();
    if (norm2 - 1.0).abs() > 1e-6 {
        return Err(WaveError::usage(format!("reference state must be normalized, ‖ψ‖² = {norm2}")));
    }
    if !e_ref.is_finite() {
        return Err(WaveError::Domain(format!("reference energy {e_ref} is not finite")));
    }
    let mut x = grid.points();
    let mut y: Vec<f64> = psi.values.iter().map(|v| v.norm_sqr()).collect();
    let radial = grid.kind() == crate::numgrid::GridKind::Radial;
    let (mut sx, mut sy) = (x.clone(), y.clone());
    if radial {
        // |u|² is even in r; mirrored knots keep the spline's end condition away from r = 0
        let m = RADIAL_MIRROR.min(x.len());
        sx = x[..m].iter().rev().map(|r| -r).chain([0.0]).chain(x.iter().copied()).collect();
        sy = y[..m].iter().rev().copied().chain([0.0]).chain(y.iter().copied()).collect();
        x.insert(0, 0.0);
        y.insert(0, 0.0);
    }
    let (a, b) = (x[0], x[x.len() - 1]);
    let density = CubicSpline::natural(sx, sy)?;
    let v = |t: f64| potential.evaluate(t).unwrap_or(f64::NAN);

    // expectations are taken against the interpolated density's own norm
    let mass = integrate_panels(|t| density.eval(t), &x, 1e-14, 1e-12)?.value;
    if !(mass > 0.0) {
        return Err(WaveError::usage("reference state vanishes"));
    }
    let minus_2v = integrate_panels(|t| -2.0 * v(t) * density.eval(t), &x, 1e-14, 1e-12)?.value / mass;

    let poles = if e_ref == 0.0 {
        Vec::new()
    } else {
        let set = find_singular_set(potential, e_ref, SingularKind::EEqualsV, &grid)?;
        if potential.is_piecewise_constant() && !set.is_empty() {
            return Err(WaveError::SingularRegion { energy: e_ref, set });
        }
        set.locations
    };
    let term = |t: f64| {
        let vt = v(t);
        if vt == 0.0 {
            0.0
        } else {
            density.eval(t) * vt * vt / (e_ref - vt)
        }
    };
    let mut pv = principal_value(term, a, b, &poles, &x, 1e-6, 40)?;
    pv.value /= mass;
    pv.history.iter_mut().for_each(|h| *h /= mass);
    if !(minus_2v.is_finite() && pv.value.is_finite()) {
        return Err(WaveError::Domain("potential could not be evaluated over the reference grid".into()));
    }
    let shift = minus_2v + pv.value;
    Ok(AdditionalTermReport {
        first_order_shift: shift,
        minus_2v_part: minus_2v,
        pv_part: pv.value,
        pv_flag: !poles.is_empty(),
        ratio: if e_ref == 0.0 { f64::INFINITY } else { (shift / e_ref).abs() },
        poles,
        pv_history: pv.history,
        pv_converged: pv.converged,
    })
}

/// Initial data and fixed scenario constants for the time-dependent equation.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDepState {
    pub psi: WaveField,
    pub dpsi_dt: WaveField,
    pub t: f64,
    pub energy: f64,
    pub epsilon: f64,
}

impl TimeDepState {
    pub fn new(psi: WaveField, dpsi_dt: WaveField, energy: f64, epsilon: f64) -> Result<Self> {
        if !psi.grid.same_as(&dpsi_dt.grid) {
            return Err(WaveError::usage("ψ and ∂ψ/∂t live on different grids"));
        }
        if !(energy.is_finite() && epsilon.is_finite()) {
            return Err(WaveError::config("E and ε must be finite"));
        }
        Ok(TimeDepState {
            psi,
            dpsi_dt,
            t: 0.0,
            energy,
            epsilon,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeDepRun {
    pub trajectory: Trajectory,
    /// `½Σ|ψ_t|²/s + ½⟨ψ, −∇²ψ⟩` at every step.
    pub wave_energy: Vec<f64>,
    pub dt_limit: f64,
    pub final_state: TimeDepState,
}

impl TimeDepRun {
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.wave_energy[0];
        let scale = if e0 > 0.0 { e0 } else { 1.0 };
        self.wave_energy.iter().map(|e| (e - e0).abs() / scale).fold(0.0, f64::max)
    }
}

/// `s(x) = (ε²/2m)(E − V)/(E − 2V)²` on the grid, with the regime checks.
pub fn wave_coefficient(grid: &Grid, potential: &PotentialSpec, energy: f64, epsilon: f64, units: &UnitSystem) -> Result<Vec<f64>> {
    let v = potential.sample(grid)?;
    let scale = v.iter().fold(energy.abs(), |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let mut singular = find_singular_set(potential, energy, SingularKind::EEquals2V, grid)?.locations;
    for i in grid.active() {
        if (energy - 2.0 * v[i]).abs() <= 1e-12 * scale {
            singular.push(grid.x(i));
        }
    }
    if !singular.is_empty() {
        singular.sort_by(f64::total_cmp);
        singular.dedup();
        return Err(WaveError::SingularCoefficient { locations: singular });
    }
    let s: Vec<f64> = v
        .iter()
        .map(|vi| epsilon * epsilon / (2.0 * units.mass) * (energy - vi) / (energy - 2.0 * vi).powi(2))
        .collect();
    let mut regions = Vec::new();
    let mut run: Option<(f64, f64)> = None;
    for i in grid.active() {
        if !(s[i] > 0.0) {
            let x = grid.x(i);
            run = Some(run.map_or((x, x), |(a, _)| (a, x)));
        } else if let Some(r) = run.take() {
            regions.push(r);
        }
    }
    regions.extend(run);
    if !regions.is_empty() {
        return Err(WaveError::NonHyperbolic { regions });
    }
    Ok(s)
}

/// Leapfrog evolution of `ψ_tt = s(x) ∇²ψ`; `E` and `ε` stay fixed parameters.
pub fn propagate_timedep(
    state0: &TimeDepState,
    potential: &PotentialSpec,
    dt: f64,
    steps: usize,
    units: &UnitSystem,
) -> Result<TimeDepRun> {
    units.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(WaveError::config(format!("dt must be > 0, got {dt}")));
    }
    if !state0.psi.grid.same_as(&state0.dpsi_dt.grid) {
        return Err(WaveError::usage("ψ and ∂ψ/∂t live on different grids"));
    }
    let grid = state0.psi.grid;
    let lap = laplacian_for(&grid, Discretization::default())?;
    let s = wave_coefficient(&grid, potential, state0.energy, state0.epsilon, units)?;
    let s_max = grid.active().map(|i| s[i]).fold(0.0, f64::max);
    let dt_limit = 0.9 * 2.0 / (s_max * lap.gershgorin_radius()).sqrt();
    if dt > dt_limit {
        return Err(WaveError::config(format!(
            "dt = {dt} exceeds the leapfrog stability limit {dt_limit:.6e}"
        )));
    }
    let active = grid.active();
    let weights = grid.quadrature_weights();
    let pinned = |mut v: Vec<Complex64>| {
        for (i, x) in v.iter_mut().enumerate() {
            if !active.contains(&i) {
                *x = Complex64::new(0.0, 0.0);
            }
        }
        v
    };
    let accel = |psi: &[Complex64]| -> Vec<Complex64> {
        let lp = lap.apply_values(psi);
        lp.iter().zip(&s).map(|(l, si)| l * *si).collect()
    };
    let energy_of = |psi: &[Complex64], vel: &[Complex64]| -> f64 {
        let lp = lap.apply_values(psi);
        let mut total = 0.0;
        for i in active.clone() {
            total += 0.5 * weights[i] * (vel[i].norm_sqr() / s[i] - (psi[i].conj() * lp[i]).re);
        }
        total
    };

    let p0 = pinned(state0.psi.values.clone());
    let v0 = pinned(state0.dpsi_dt.values.clone());
    let a0 = accel(&p0);
    let mut prev = p0.clone();
    let mut cur: Vec<Complex64> = pinned(
        (0..p0.len())
            .map(|i| p0[i] + v0[i] * dt + a0[i] * (0.5 * dt * dt))
            .collect(),
    );
    let mut traj = Trajectory::start(dt, WaveField { grid, values: p0.clone() }, grid_norm(&grid, &p0), steps);
    let mut wave_energy = vec![energy_of(&p0, &v0)];
    let mut last_velocity = v0;
    for step in 1..=steps {
        let a = accel(&cur);
        let next = pinned((0..cur.len()).map(|i| 2.0 * cur[i] - prev[i] + a[i] * (dt * dt)).collect());
        let vel: Vec<Complex64> = next.iter().zip(&prev).map(|(n, p)| (n - p) / (2.0 * dt)).collect();
        wave_energy.push(energy_of(&cur, &vel));
        traj.push(step as f64 * dt, WaveField { grid, values: cur.clone() }, grid_norm(&grid, &cur));
        last_velocity = vel;
        prev = std::mem::replace(&mut cur, next);
    }
    let final_state = TimeDepState {
        psi: traj.last().clone(),
        dpsi_dt: WaveField {
            grid,
            values: last_velocity,
        },
        t: state0.t + steps as f64 * dt,
        energy: state0.energy,
        epsilon: state0.epsilon,
    };
    Ok(TimeDepRun {
        trajectory: traj,
        wave_energy,
        dt_limit,
        final_state,
    })
}

/// `f(t) = B1 e^{iεt/ħ} + B2 e^{−iεt/ħ}`.
pub fn time_factor(epsilon: f64, b1: Complex64, b2: Complex64, t: f64, units: &UnitSystem) -> Complex64 {
    let phase = Complex64::new(0.0, epsilon * t / units.hbar).exp();
    b1 * phase + b2 / phase
}

/// Closed-form `f''(t)`.
pub fn time_factor_second_derivative(epsilon: f64, b1: Complex64, b2: Complex64, t: f64, units: &UnitSystem) -> Complex64 {
    let w = Complex64::new(0.0, epsilon / units.hbar);
    let phase = (w * t).exp();
    b1 * w * w * phase + b2 * w * w / phase
}

/// `f''/f`, which should equal `−ε²/ħ²`.
pub fn separation_constant(epsilon: f64, b1: Complex64, b2: Complex64, t: f64, units: &UnitSystem) -> Result<Complex64> {
    let f = time_factor(epsilon, b1, b2, t, units);
    if f.norm() == 0.0 {
        return Err(WaveError::Domain(format!("f({t}) = 0, the ratio f''/f is undefined")));
    }
    Ok(time_factor_second_derivative(epsilon, b1, b2, t, units) / f)
}

/// `ψ_n(x) f(t)`.
pub fn separated_solution(psi_n: &WaveField, epsilon: f64, b1: Complex64, b2: Complex64, t: f64, units: &UnitSystem) -> WaveField {
    psi_n.scaled(time_factor(epsilon, b1, b2, t, units))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numgrid::Boundary;
    use std::f64::consts::PI;

    fn box_grid(n: usize) -> Grid {
        Grid::line(0.0, PI, n, Boundary::Dirichlet).unwrap()
    }

    #[test]
    fn effective_potential_values() {
        let g = Grid::line(-3.0, 3.0, 61, Boundary::Dirichlet).unwrap();
        let w = effective_potential(&PotentialSpec::free(), 1.3, &g, &SingularGuard::default()).unwrap();
        assert!(w.iter().all(|x| *x == 0.0));
        let w = effective_potential(&PotentialSpec::square_well(10.0, 1.0), -4.0, &g, &SingularGuard::default()).unwrap();
        assert!((w[30] - (-30.0 - 100.0 / 6.0)).abs() < 1e-12);
        assert_eq!(w[0], 0.0);
    }

    #[test]
    fn turning_points_are_rejected_or_clamped() {
        let g = Grid::line(-5.0, 5.0, 101, Boundary::Dirichlet).unwrap();
        let v = PotentialSpec::harmonic(1.0, 1.0);
        match effective_potential(&v, 2.0, &g, &SingularGuard::default()) {
            Err(WaveError::SingularRegion { set, .. }) => {
                assert_eq!(set.locations.len(), 2);
                assert!((set.locations[1] - 2.0).abs() < 1e-9);
                assert!((set.locations[0] + 2.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
        let w = effective_potential(&v, 2.0, &g, &SingularGuard::clamp(Some(1e-3))).unwrap();
        assert!(w.iter().all(|x| x.is_finite()));
        // node at x = 2 has E − V = 0 exactly: clamped to +floor
        assert!((w[70] - (6.0 - 4.0 / 1e-3)).abs() < 1e-6);
    }

    #[test]
    fn free_fixed_point_is_the_box_ground_state() {
        let g = box_grid(1025);
        let r = solve_stationary_fixed_point(&g, &PotentialSpec::free(), 0, 0.0, &FixedPointOptions::default(), &UnitSystem::natural()).unwrap();
        assert!((r.energy - 0.5).abs() < 1e-5);
        assert_eq!(r.iterations, 2);
        assert_eq!(r.node_count, 0);
        let again = solve_stationary_fixed_point(&g, &PotentialSpec::free(), 0, r.energy, &FixedPointOptions::default(), &UnitSystem::natural()).unwrap();
        assert_eq!(again.iterations, 1);
        assert!(again.self_consistency_residual <= 1e-10);
    }

    #[test]
    fn square_well_fixed_point_matches_shooting() {
        let v = PotentialSpec::square_well(10.0, 1.0);
        let g = Grid::line(-6.0, 6.0, 601, Boundary::Dirichlet).unwrap();
        let units = UnitSystem::natural();
        let shots = solve_stationary_shooting(&v, (-9.5, -1e-5), Ends::Open, &g, &units).unwrap();
        let model = PiecewiseModel::new(&v, Ends::Open, &g, &units, SingularGuard::default()).unwrap();
        let found = discover_fixed_points(&model, -9.5, -1e-5, 400, &FixedPointOptions::default()).unwrap();
        assert!(!shots.states.is_empty());
        assert_eq!(found.states.len(), shots.states.len());
        for (a, b) in found.states.iter().zip(&shots.states) {
            assert!((a.energy - b.energy).abs() < 1e-8, "{} vs {}", a.energy, b.energy);
            assert_eq!(a.node_count, b.node_count);
            assert!(b.self_consistency_residual < 1e-8);
        }
    }

    #[test]
    fn walls_shooting_gives_box_levels() {
        let g = box_grid(201);
        let r = solve_stationary_shooting(&PotentialSpec::free(), (0.1, 13.0), Ends::Walls(0.0, PI), &g, &UnitSystem::natural()).unwrap();
        let e: Vec<f64> = r.states.iter().map(|s| s.energy).collect();
        assert_eq!(e.len(), 5);
        for (i, x) in e.iter().enumerate() {
            let n = (i + 1) as f64;
            assert!((x - n * n / 2.0).abs() < 1e-10);
            assert_eq!(r.states[i].node_count, i);
        }
    }

    #[test]
    fn empty_bracket_is_no_root() {
        let g = box_grid(50);
        let err = solve_stationary_shooting(&PotentialSpec::square_well(0.1, 0.5), (-0.09, -0.08), Ends::Open, &g, &UnitSystem::natural());
        assert!(matches!(err, Err(WaveError::NoRoot { .. })));
    }

    #[test]
    fn non_hyperbolic_and_singular_coefficient() {
        let g = Grid::line(-4.0, 4.0, 81, Boundary::Dirichlet).unwrap();
        let psi = WaveField::zeros(&g);
        let st = TimeDepState::new(psi.clone(), psi.clone(), -4.0, 1.0).unwrap();
        let r = propagate_timedep(&st, &PotentialSpec::square_well(10.0, 1.0), 1e-3, 10, &UnitSystem::natural());
        match r {
            Err(WaveError::NonHyperbolic { regions }) => {
                assert_eq!(regions.len(), 2);
                assert!((regions[0].0 + 3.9).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let st = TimeDepState::new(psi.clone(), psi, -20.0, 1.0).unwrap();
        let r = propagate_timedep(&st, &PotentialSpec::square_well(10.0, 1.0), 1e-3, 10, &UnitSystem::natural());
        assert!(matches!(r, Err(WaveError::SingularCoefficient { .. })));
    }

    #[test]
    fn time_factor_identities() {
        let u = UnitSystem::natural();
        let half = Complex64::new(0.5, 0.0);
        let f = time_factor(0.7, half, half, 1.3, &u);
        assert!((f.re - (0.7f64 * 1.3).cos()).abs() < 1e-15 && f.im.abs() < 1e-15);
        let c = separation_constant(0.7, Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.9), 0.4, &u).unwrap();
        assert!((c.re + 0.49).abs() < 1e-12 && c.im.abs() < 1e-12);
    }
}

#[cfg(test)]
mod report_tests {
    use super::*;
    use crate::numgrid::Boundary;
    use crate::reference::hydrogenic_ground_state;

    #[test]
    fn hydrogen_report_parts() {
        let units = UnitSystem::natural();
        let g = Grid::radial(40.0, 40000).unwrap();
        let psi = hydrogenic_ground_state(&g, 1.0, &units).normalized();
        let r = additional_term_report(&psi, -0.5, &PotentialSpec::coulomb(1.0), &units).unwrap();
        assert!((r.minus_2v_part - 2.0).abs() < 1e-6, "{}", r.minus_2v_part);
        assert!(r.pv_flag && r.pv_converged);
        assert_eq!(r.poles.len(), 1);
        assert!((r.poles[0] - 2.0).abs() < 1e-9);
        assert!((r.pv_part - 1.75283).abs() < 1e-4, "{}", r.pv_part);
    }

    #[test]
    fn free_plane_wave_oscillates_at_epsilon() {
        let units = UnitSystem::natural();
        let g = Grid::line(0.0, 2.0 * std::f64::consts::PI, 256, Boundary::Periodic).unwrap();
        let eps = 0.5;
        let psi = WaveField::from_fn(&g, |x| Complex64::new(0.0, x).exp());
        let dpsi = psi.scaled(Complex64::new(0.0, -eps));
        let st = TimeDepState::new(psi.clone(), dpsi, eps, eps).unwrap();
        let dt = 0.01;
        let run = propagate_timedep(&st, &PotentialSpec::free(), dt, 1000, &units).unwrap();
        let last = run.trajectory.last();
        let t = 1000.0 * dt;
        let want = Complex64::new(0.0, -eps * t).exp();
        let got = last.values[17] / psi.values[17];
        assert!((got.norm() - 1.0).abs() < 1e-4, "{}", got.norm());
        assert!((got - want).norm() < 1e-3, "{got} vs {want}");
        assert!(run.max_energy_drift() < 1e-4);
    }
}
