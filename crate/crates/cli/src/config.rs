//! Scenario documents: TOML in, validated [`ScenarioConfig`] out.

use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};
use wavekit_core::modified_nr::Relaxation;
use wavekit_core::{Boundary, Discretization, Ends, GuardPolicy, Grid, PotentialSpec, SingularGuard, UnitSystem};

/// Speed of light in atomic-like units, the default for relativistic equations.
pub const DEFAULT_RELATIVISTIC_C: f64 = 137.035999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Schrodinger,
    ModifiedNrStationary,
    ModifiedNrTimedep,
    ModifiedRelStationary,
    ModifiedRelTimedep,
    SpinHalfStationary,
    MasslessSpinHalf,
    DispersionAudit,
}

impl Equation {
    pub const ALL: [Equation; 8] = [
        Equation::Schrodinger,
        Equation::ModifiedNrStationary,
        Equation::ModifiedNrTimedep,
        Equation::ModifiedRelStationary,
        Equation::ModifiedRelTimedep,
        Equation::SpinHalfStationary,
        Equation::MasslessSpinHalf,
        Equation::DispersionAudit,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Equation::Schrodinger => "schrodinger",
            Equation::ModifiedNrStationary => "modified_nr_stationary",
            Equation::ModifiedNrTimedep => "modified_nr_timedep",
            Equation::ModifiedRelStationary => "modified_rel_stationary",
            Equation::ModifiedRelTimedep => "modified_rel_timedep",
            Equation::SpinHalfStationary => "spin_half_stationary",
            Equation::MasslessSpinHalf => "massless_spin_half",
            Equation::DispersionAudit => "dispersion_audit",
        }
    }

    fn from_id(id: &str) -> Option<Self> {
        Equation::ALL.into_iter().find(|e| e.id() == id)
    }

    pub fn is_relativistic(self) -> bool {
        matches!(
            self,
            Equation::ModifiedRelStationary
                | Equation::ModifiedRelTimedep
                | Equation::SpinHalfStationary
                | Equation::MasslessSpinHalf
                | Equation::DispersionAudit
        )
    }

    pub fn needs_grid(self) -> bool {
        self != Equation::DispersionAudit
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitsBlock {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
    /// Filled in during parsing when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Charge `e` for the electrostatic potential.
    #[serde(default = "one")]
    pub charge: f64,
}

impl Default for UnitsBlock {
    fn default() -> Self {
        UnitsBlock {
            hbar: 1.0,
            mass: 1.0,
            c: None,
            charge: 1.0,
        }
    }
}

impl UnitsBlock {
    pub fn system(&self) -> wavekit_core::Result<UnitSystem> {
        UnitSystem::new(self.hbar, self.mass, self.c.unwrap_or(1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialBlock {
    #[serde(flatten)]
    pub spec: PotentialSpec,
    /// The shape describes an electric potential φ(x); the scalar potential is `e ε φ / E0`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub electrostatic: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vector_potential: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKindName {
    #[default]
    Line,
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryName {
    #[default]
    Dirichlet,
    Periodic,
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridBlock {
    #[serde(default)]
    pub kind: GridKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    pub n_points: usize,
    #[serde(default)]
    pub boundary: BoundaryName,
    #[serde(default = "two")]
    pub order: usize,
    #[serde(default)]
    pub angular_momentum: i64,
}

impl GridBlock {
    pub fn build(&self) -> wavekit_core::Result<Grid> {
        match self.kind {
            GridKindName::Line => {
                let bc = match self.boundary {
                    BoundaryName::Dirichlet => Boundary::Dirichlet,
                    BoundaryName::Periodic => Boundary::Periodic,
                };
                Grid::line(self.x_min.unwrap_or(0.0), self.x_max.unwrap_or(1.0), self.n_points, bc)
            }
            GridKindName::Radial => Grid::radial(self.r_max.unwrap_or(1.0), self.n_points),
        }
    }

    pub fn discretization(&self) -> Discretization {
        Discretization {
            order: self.order,
            angular_momentum: self.angular_momentum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    FixedPoint,
    Shooting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    /// Finite differences on the scenario grid.
    #[default]
    Grid,
    /// Transfer matrices (piecewise-constant potentials only).
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndsName {
    Walls,
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverBlock {
    pub n_states: usize,
    pub method: Method,
    pub inner: InnerSolver,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub relaxation: Relaxation,
    pub policy: GuardPolicy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket: Option<[f64; 2]>,
    pub scan_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ends: Option<EndsName>,
    pub wilson_r: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// `E` for the time-dependent modified equations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    /// `ε`; defaults from the initial plane wave when there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub perturbation: bool,
    pub momenta: Vec<f64>,
}

impl Default for SolverBlock {
    fn default() -> Self {
        SolverBlock {
            n_states: 5,
            method: Method::FixedPoint,
            inner: InnerSolver::Grid,
            tol: 1e-10,
            max_iter: 200,
            damping: 1.0,
            relaxation: Relaxation::Newton,
            policy: GuardPolicy::Reject,
            floor: None,
            bracket: None,
            scan_samples: 400,
            ends: None,
            wilson_r: 1.0,
            dt: None,
            steps: None,
            energy: None,
            epsilon: None,
            perturbation: false,
            momenta: vec![0.5, 1.0, 2.0],
        }
    }
}

impl SolverBlock {
    pub fn guard(&self) -> SingularGuard {
        SingularGuard {
            policy: self.policy,
            floor: self.floor,
        }
    }

    /// Shooting ends: explicit choice, else walls at a Dirichlet grid's ends.
    pub fn ends_for(&self, grid: &Grid) -> Ends {
        match self.ends {
            Some(EndsName::Open) => Ends::Open,
            Some(EndsName::Walls) => Ends::Walls(grid.x_min(), grid.x_max()),
            None if grid.is_periodic() => Ends::Open,
            None => Ends::Walls(grid.x_min(), grid.x_max()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialBlock {
    PlaneWave {
        p: f64,
        #[serde(default = "yes", skip_serializing_if = "is_true")]
        positive: bool,
    },
    Gaussian {
        center: f64,
        sigma: f64,
        #[serde(default)]
        k0: f64,
    },
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
    #[serde(default = "ten")]
    pub frame_stride: usize,
    #[serde(default = "yes")]
    pub include_states: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            path: None,
            format: Format::Json,
            frame_stride: 10,
            include_states: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub equation: Equation,
    #[serde(default)]
    pub units: UnitsBlock,
    pub potential: PotentialBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridBlock>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Every problem found in a document, in discovery order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const TOP_KEYS: &[&str] = &["equation", "units", "potential", "grid", "solver", "initial", "output"];
const UNITS_KEYS: &[&str] = &["hbar", "mass", "c", "charge"];
const GRID_KEYS: &[&str] = &["kind", "x_min", "x_max", "r_max", "n_points", "boundary", "order", "angular_momentum"];
const SOLVER_KEYS: &[&str] = &[
    "n_states", "method", "inner", "tol", "max_iter", "damping", "relaxation", "policy", "floor", "bracket", "scan_samples",
    "ends", "wilson_r", "dt", "steps", "energy", "epsilon", "perturbation", "momenta",
];
const POTENTIAL_KEYS: &[&str] = &[
    "kind", "center", "depth", "half_width", "height", "edge", "left", "right", "omega", "mass", "strength", "breakpoints",
    "values", "points", "electrostatic", "vector_potential",
];
const POTENTIAL_KINDS: &[&str] = &[
    "free", "square_well", "step", "barrier", "harmonic", "coulomb", "piecewise_constant", "tabulated",
];
const INITIAL_KEYS: &[&str] = &["kind", "p", "positive", "center", "sigma", "k0"];
const OUTPUT_KEYS: &[&str] = &["path", "format", "frame_stride", "include_states"];

/// Closest candidate by Jaro-Winkler similarity, if it is reasonably close.
pub fn suggest<'a>(word: &str, candidates: &[&'a str]) -> Option<&'a str> {
    candidates
        .iter()
        .map(|c| (strsim::jaro_winkler(word, c), *c))
        .filter(|(s, _)| *s >= 0.75)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
}

fn unknown(what: &str, word: &str, candidates: &[&str]) -> String {
    match suggest(word, candidates) {
        Some(s) => format!("{what} `{word}` is not recognized; did you mean `{s}`?"),
        None => format!("{what} `{word}` is not recognized; expected one of: {}", candidates.join(", ")),
    }
}

fn check_keys(block: &str, table: &Table, allowed: &[&str], errs: &mut Vec<String>) {
    let full = |k: &str| if block.is_empty() { k.to_string() } else { format!("{block}.{k}") };
    for key in table.keys() {
        if allowed.contains(&key.as_str()) {
            continue;
        }
        errs.push(match suggest(key, allowed) {
            Some(s) => format!("key `{}` is not recognized; did you mean `{}`?", full(key), full(s)),
            None => format!("key `{}` is not recognized; allowed: {}", full(key), allowed.join(", ")),
        });
    }
}

fn block<T: DeserializeOwned>(name: &str, value: &Value, errs: &mut Vec<String>) -> Option<T> {
    match value.clone().try_into::<T>() {
        Ok(v) => Some(v),
        Err(e) => {
            errs.push(format!("{name}: {}", e.message().trim()));
            None
        }
    }
}

/// Parses and validates a scenario document, collecting every problem.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ConfigErrors> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigErrors(vec![format!("malformed document: {}", e.message().trim())]))?;
    parse_table(&table)
}

pub fn parse_table(table: &Table) -> Result<ScenarioConfig, ConfigErrors> {
    let mut errs = Vec::new();
    check_keys("", table, TOP_KEYS, &mut errs);

    let equation = match table.get("equation") {
        None => {
            errs.push("missing `equation`".into());
            None
        }
        Some(Value::String(id)) => match Equation::from_id(id) {
            Some(e) => Some(e),
            None => {
                let ids: Vec<&str> = Equation::ALL.iter().map(|e| e.id()).collect();
                errs.push(unknown("equation", id, &ids));
                None
            }
        },
        Some(other) => {
            errs.push(format!("`equation` must be a string, got {}", other.type_str()));
            None
        }
    };

    let sub = |name: &str, errs: &mut Vec<String>| -> Option<Table> {
        match table.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t.clone()),
            Some(other) => {
                errs.push(format!("`{name}` must be a table, got {}", other.type_str()));
                None
            }
        }
    };

    let units = match sub("units", &mut errs) {
        Some(t) => {
            check_keys("units", &t, UNITS_KEYS, &mut errs);
            block::<UnitsBlock>("units", &Value::Table(t), &mut errs)
        }
        None => Some(UnitsBlock::default()),
    };

    let potential = match sub("potential", &mut errs) {
        Some(t) => {
            check_keys("potential", &t, POTENTIAL_KEYS, &mut errs);
            match t.get("kind") {
                None => {
                    errs.push("missing `potential.kind`".into());
                    None
                }
                Some(Value::String(k)) if !POTENTIAL_KINDS.contains(&k.as_str()) => {
                    errs.push(unknown("potential kind", k, POTENTIAL_KINDS));
                    None
                }
                Some(_) => block::<PotentialBlock>("potential", &Value::Table(t), &mut errs),
            }
        }
        None => {
            errs.push("missing block [potential]".into());
            None
        }
    };

    let grid = match sub("grid", &mut errs) {
        Some(t) => {
            check_keys("grid", &t, GRID_KEYS, &mut errs);
            block::<GridBlock>("grid", &Value::Table(t), &mut errs).map(Some)
        }
        None => {
            if equation.is_some_and(|e| e.needs_grid()) {
                errs.push("missing block [grid]".into());
            }
            Some(None)
        }
    };

    let solver = match sub("solver", &mut errs) {
        Some(t) => {
            check_keys("solver", &t, SOLVER_KEYS, &mut errs);
            block::<SolverBlock>("solver", &Value::Table(t), &mut errs)
        }
        None => Some(SolverBlock::default()),
    };

    let initial = match sub("initial", &mut errs) {
        Some(t) => {
            check_keys("initial", &t, INITIAL_KEYS, &mut errs);
            block::<InitialBlock>("initial", &Value::Table(t), &mut errs).map(Some)
        }
        None => Some(None),
    };

    let output = match sub("output", &mut errs) {
        Some(t) => {
            check_keys("output", &t, OUTPUT_KEYS, &mut errs);
            block::<OutputBlock>("output", &Value::Table(t), &mut errs)
        }
        None => Some(OutputBlock::default()),
    };

    let (Some(mut units), Some(potential), Some(grid), Some(solver), Some(initial), Some(output)) =
        (units, potential, grid, solver, initial, output)
    else {
        return Err(ConfigErrors(errs));
    };
    let Some(equation) = equation else {
        // Still report the checks that do not depend on the equation.
        let probe = ScenarioConfig {
            equation: Equation::Schrodinger,
            units,
            potential,
            grid,
            solver,
            initial,
            output,
        };
        errs.extend(validate_common(&probe));
        return Err(ConfigErrors(errs));
    };
    if units.c.is_none() {
        units.c = Some(if equation.is_relativistic() { DEFAULT_RELATIVISTIC_C } else { 1.0 });
    }
    let config = ScenarioConfig {
        equation,
        units,
        potential,
        grid,
        solver,
        initial,
        output,
    };
    errs.extend(validate(&config));
    if errs.is_empty() {
        Ok(config)
    } else {
        Err(ConfigErrors(errs))
    }
}

fn positive(errs: &mut Vec<String>, name: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errs.push(format!("`{name}` must be > 0, got {v}"));
    }
}

/// Semantic checks that serde cannot express.
pub fn validate(c: &ScenarioConfig) -> Vec<String> {
    let mut errs = validate_common(c);
    errs.extend(validate_for_equation(c));
    errs
}

fn validate_common(c: &ScenarioConfig) -> Vec<String> {
    let mut errs = Vec::new();
    positive(&mut errs, "units.hbar", c.units.hbar);
    positive(&mut errs, "units.mass", c.units.mass);
    positive(&mut errs, "units.c", c.units.c.unwrap_or(1.0));
    if !c.units.charge.is_finite() {
        errs.push("`units.charge` must be finite".into());
    }
    if let Err(list) = c.potential.spec.validate() {
        errs.extend(list.into_iter().map(|e| format!("`{e}`")));
    }

    if let Some(g) = &c.grid {
        match g.kind {
            GridKindName::Line => match (g.x_min, g.x_max) {
                (Some(a), Some(b)) if a < b && a.is_finite() && b.is_finite() => {}
                (Some(a), Some(b)) => errs.push(format!("`grid.x_min` must be < `grid.x_max`, got {a} and {b}")),
                _ => errs.push("line grids need `grid.x_min` and `grid.x_max`".into()),
            },
            GridKindName::Radial => match g.r_max {
                Some(r) => positive(&mut errs, "grid.r_max", r),
                None => errs.push("radial grids need `grid.r_max`".into()),
            },
        }
        if g.n_points < wavekit_core::numgrid::MIN_POINTS {
            errs.push(format!("`grid.n_points` must be >= {}, got {}", wavekit_core::numgrid::MIN_POINTS, g.n_points));
        }
        if g.order != 2 && g.order != 4 {
            errs.push(format!("`grid.order` must be 2 or 4, got {}", g.order));
        }
        if g.angular_momentum < 0 {
            errs.push(format!("`grid.angular_momentum` must be >= 0, got {}", g.angular_momentum));
        }
        if g.kind == GridKindName::Radial && g.boundary == BoundaryName::Periodic {
            errs.push("radial grids cannot be periodic".into());
        }
    }

    let s = &c.solver;
    positive(&mut errs, "solver.tol", s.tol);
    if s.max_iter == 0 {
        errs.push("`solver.max_iter` must be >= 1".into());
    }
    if !(s.damping > 0.0 && s.damping <= 1.0) {
        errs.push(format!("`solver.damping` must lie in (0, 1], got {}", s.damping));
    }
    if s.n_states == 0 {
        errs.push("`solver.n_states` must be >= 1".into());
    }
    if let Some(f) = s.floor {
        positive(&mut errs, "solver.floor", f);
    }
    if let Some([lo, hi]) = s.bracket {
        if !(lo < hi) {
            errs.push(format!("`solver.bracket` must be increasing, got [{lo}, {hi}]"));
        }
    }
    if s.scan_samples < 2 {
        errs.push("`solver.scan_samples` must be >= 2".into());
    }
    if !(s.wilson_r >= 0.0 && s.wilson_r.is_finite()) {
        errs.push(format!("`solver.wilson_r` must be >= 0, got {}", s.wilson_r));
    }
    if let Some(dt) = s.dt {
        positive(&mut errs, "solver.dt", dt);
    }
    if c.output.frame_stride == 0 {
        errs.push("`output.frame_stride` must be >= 1".into());
    }
    match c.initial {
        Some(InitialBlock::Gaussian { sigma, .. }) => positive(&mut errs, "initial.sigma", sigma),
        Some(InitialBlock::PlaneWave { p, .. }) if !p.is_finite() => errs.push("`initial.p` must be finite".into()),
        _ => {}
    }

    errs
}

fn validate_for_equation(c: &ScenarioConfig) -> Vec<String> {
    let mut errs = Vec::new();
    let s = &c.solver;
    if c.potential.electrostatic && !c.equation.is_relativistic() {
        errs.push("`potential.electrostatic` only applies to relativistic equations".into());
    }
    let shooting = c.equation == Equation::ModifiedNrStationary && s.method == Method::Shooting;
    if (shooting || c.equation == Equation::ModifiedRelStationary) && s.bracket.is_none() {
        errs.push(format!("`solver.bracket` is required for {}{}", c.equation, if shooting { " with method = \"shooting\"" } else { "" }));
    }
    if c.equation == Equation::ModifiedNrTimedep && s.energy.is_none() {
        errs.push("`solver.energy` (the fixed E) is required for modified_nr_timedep".into());
    }
    if c.equation == Equation::DispersionAudit {
        if s.momenta.is_empty() {
            errs.push("`solver.momenta` must not be empty".into());
        }
        let constant = match &c.potential.spec.shape {
            wavekit_core::PotentialShape::Free => true,
            wavekit_core::PotentialShape::PiecewiseConstant { values, .. } => values.len() == 1,
            _ => false,
        };
        if !constant {
            errs.push("dispersion_audit needs a free or constant potential".into());
        }
    }
    errs
}

/// Serializes a config back to TOML; `parse_scenario` of the result gives the same config.
pub fn emit(config: &ScenarioConfig) -> String {
    toml::to_string(config).expect("scenario configs are always representable in TOML")
}

/// Parameters that time-dependent runs need, with their defaults resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stepping {
    pub dt: f64,
    pub steps: usize,
}

impl SolverBlock {
    pub fn stepping(&self) -> Result<Stepping, String> {
        match (self.dt, self.steps) {
            (Some(dt), Some(steps)) => Ok(Stepping { dt, steps }),
            _ => Err("time-dependent runs need `solver.dt` and `solver.steps`".into()),
        }
    }
}
