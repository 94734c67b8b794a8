//! Executes one scenario and packages the outcome as a [`RunReport`].

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::Value;
use wavekit_core::modified_nr::{
    discover_fixed_points, fixed_point, solve_stationary_shooting_with, GridModel, LinearSpectrum, PiecewiseModel, StateScan,
    SHOOTING_SAMPLES,
};
use wavekit_core::modified_rel::{check_epsilon, electrostatic_invariant_potential, solve_rel_stationary_with};
use wavekit_core::planewave::{
    calibration_residuals, residual_massless, residual_nr_stationary, residual_nr_timedep, residual_rel_stationary,
    residual_rel_timedep, residual_spin_half, Branch, PlaneWaveState,
};
use wavekit_core::reference::{gaussian_packet, klein_gordon_energy, solve_schrodinger_with};
use wavekit_core::{
    additional_term_report, propagate_massless, propagate_rel_timedep, propagate_schrodinger, propagate_timedep, solve_massless,
    solve_spin_half_stationary, FixedPointOptions, Grid, ModifiedEigenResult, PotentialShape, PotentialSpec, RelScenario,
    SpectrumResult, SpinorField, TimeDepState, Trajectory, UnitSystem, WaveError, WaveField,
};

use crate::config::{emit, Equation, InitialBlock, InnerSolver, Method, ScenarioConfig};
use crate::report::{
    sha256_hex, DispersionRow, ErrorObject, Frame, Level, Payload, RunReport, Samples, Status, TrajectorySummary, EXIT_OK,
};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Solve,
    Propagate,
    Dispersion,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Propagate => "propagate",
            Command::Dispersion => "dispersion",
        }
    }

    /// The mode a sweep uses for each equation.
    pub fn default_for(equation: Equation) -> Self {
        match equation {
            Equation::ModifiedNrTimedep | Equation::ModifiedRelTimedep => Command::Propagate,
            Equation::DispersionAudit => Command::Dispersion,
            _ => Command::Solve,
        }
    }

    fn accepts(self, equation: Equation) -> bool {
        use Equation::*;
        match self {
            Command::Solve => matches!(
                equation,
                Schrodinger | ModifiedNrStationary | ModifiedRelStationary | SpinHalfStationary | MasslessSpinHalf
            ),
            Command::Propagate => matches!(equation, Schrodinger | ModifiedNrTimedep | ModifiedRelTimedep | MasslessSpinHalf),
            Command::Dispersion => equation == DispersionAudit,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Warnings and diagnostics gathered while running, kept even when the run fails.
#[derive(Debug, Default)]
struct Notes {
    warnings: Vec<String>,
    diagnostics: BTreeMap<String, Value>,
}

impl Notes {
    fn put(&mut self, key: &str, value: impl Serialize) {
        self.diagnostics
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }
}

pub fn input_digest(config: &ScenarioConfig) -> String {
    sha256_hex(emit(config).as_bytes())
}

/// Runs `config` in the given mode. Never panics on solver failure: errors
/// become the report's error object and exit code.
pub fn run_scenario(config: &ScenarioConfig, command: Command) -> RunReport {
    let start = Instant::now();
    let mut notes = Notes::default();
    let result = if command.accepts(config.equation) {
        execute(config, command, &mut notes)
    } else {
        Err(WaveError::Usage(format!(
            "`{command}` does not apply to equation `{}`; use `{}`",
            config.equation,
            Command::default_for(config.equation)
        )))
    };
    let (status, exit_code, payload, error) = match result {
        Ok(p) => (Status::Ok, EXIT_OK, Some(p), None),
        Err(e) => {
            let obj = ErrorObject::from(&e);
            (Status::Error, obj.exit_code, None, Some(obj))
        }
    };
    RunReport {
        artifact_version: ARTIFACT_VERSION.to_string(),
        command: command.name().to_string(),
        equation: config.equation,
        input_digest: input_digest(config),
        scenario: config.clone(),
        status,
        exit_code,
        payload,
        error,
        warnings: notes.warnings,
        diagnostics: notes.diagnostics,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

fn execute(config: &ScenarioConfig, command: Command, notes: &mut Notes) -> Result<Payload, WaveError> {
    let units = config.units.system()?;
    if command == Command::Dispersion {
        return dispersion(config, &units, notes);
    }
    let grid_block = config
        .grid
        .as_ref()
        .ok_or_else(|| WaveError::Config("missing block [grid]".into()))?;
    let grid = grid_block.build()?;
    let potential = scalar_potential(config, &units, notes)?;
    match (command, config.equation) {
        (Command::Solve, Equation::Schrodinger) => solve_reference(config, &grid, &potential, &units, notes),
        (Command::Solve, Equation::ModifiedNrStationary) => solve_modified_nr(config, &grid, &potential, &units, notes),
        (Command::Solve, Equation::ModifiedRelStationary) => solve_modified_rel(config, &grid, &potential, &units, notes),
        (Command::Solve, Equation::SpinHalfStationary) => {
            let r = solve_spin_half_stationary(&grid, &potential, &units, config.solver.wilson_r, config.solver.n_states)?;
            Ok(spinor_spectrum(config, "generalized_eigen", r, notes))
        }
        (Command::Solve, Equation::MasslessSpinHalf) => {
            let r = solve_massless(&grid, &potential, &units, config.solver.n_states)?;
            Ok(spinor_spectrum(config, "generalized_eigen", r, notes))
        }
        (Command::Propagate, Equation::Schrodinger) => {
            let psi0 = scalar_initial(config, &grid, &units)?;
            let step = config.solver.stepping().map_err(WaveError::Config)?;
            let traj = propagate_schrodinger(&psi0, &potential, step.dt, step.steps, &units)?;
            Ok(scalar_trajectory(config, &traj, None, None))
        }
        (Command::Propagate, Equation::ModifiedNrTimedep) => propagate_modified_nr(config, &grid, &potential, &units, notes),
        (Command::Propagate, Equation::ModifiedRelTimedep) => propagate_modified_rel(config, &grid, &potential, &units, notes),
        (Command::Propagate, Equation::MasslessSpinHalf) => {
            let psi0 = spinor_initial(config, &grid, &units)?;
            let step = config.solver.stepping().map_err(WaveError::Config)?;
            let traj = propagate_massless(&psi0, &potential, step.dt, step.steps, &units)?;
            Ok(spinor_trajectory(config, &traj))
        }
        (c, e) => Err(WaveError::Usage(format!("`{c}` does not apply to equation `{e}`"))),
    }
}

/// Multiplies every energy in `spec` by `factor`.
fn scaled_potential(spec: &PotentialSpec, factor: f64) -> Result<PotentialSpec, WaveError> {
    let shape = match &spec.shape {
        PotentialShape::Free => PotentialShape::Free,
        PotentialShape::SquareWell { depth, half_width } => PotentialShape::SquareWell {
            depth: depth * factor,
            half_width: *half_width,
        },
        PotentialShape::Step { height, edge } => PotentialShape::Step {
            height: height * factor,
            edge: *edge,
        },
        PotentialShape::Barrier { height, left, right } => PotentialShape::Barrier {
            height: height * factor,
            left: *left,
            right: *right,
        },
        PotentialShape::Harmonic { omega, mass } => {
            if factor < 0.0 {
                return Err(WaveError::Config(format!(
                    "electrostatic factor {factor} is negative; a harmonic shape cannot be inverted"
                )));
            }
            PotentialShape::Harmonic {
                omega: omega * factor.sqrt(),
                mass: *mass,
            }
        }
        PotentialShape::Coulomb { strength } => PotentialShape::Coulomb {
            strength: strength * factor,
        },
        PotentialShape::PiecewiseConstant { breakpoints, values } => PotentialShape::PiecewiseConstant {
            breakpoints: breakpoints.clone(),
            values: values.iter().map(|v| v * factor).collect(),
        },
        PotentialShape::Tabulated { points, values } => PotentialShape::Tabulated {
            points: points.clone(),
            values: values.iter().map(|v| v * factor).collect(),
        },
    };
    Ok(PotentialSpec {
        shape,
        center: spec.center,
    })
}

/// The potential the solvers see: the configured shape, or `e ε φ / E0` for
/// an electrostatic block.
fn scalar_potential(config: &ScenarioConfig, units: &UnitSystem, notes: &mut Notes) -> Result<PotentialSpec, WaveError> {
    let block = &config.potential;
    if !block.electrostatic && block.vector_potential.is_empty() {
        return Ok(block.spec.clone());
    }
    let epsilon = rel_epsilon(config, units).unwrap_or(units.rest_energy);
    let factor = electrostatic_invariant_potential(1.0, epsilon, config.units.charge, &block.vector_potential, units)?;
    notes.put("electrostatic_factor", factor);
    scaled_potential(&block.spec, factor)
}

fn plane_wave_momentum(config: &ScenarioConfig) -> Option<f64> {
    match config.initial {
        Some(InitialBlock::PlaneWave { p, .. }) => Some(p),
        _ => None,
    }
}

/// `ε` for the relativistic equations: explicit, else `√(c²p² + E0²)` of the initial plane wave.
fn rel_epsilon(config: &ScenarioConfig, units: &UnitSystem) -> Option<f64> {
    config
        .solver
        .epsilon
        .or_else(|| plane_wave_momentum(config).map(|p| klein_gordon_energy(p, units.rest_energy, units.c)))
}

fn fixed_point_options(config: &ScenarioConfig) -> FixedPointOptions {
    let s = &config.solver;
    FixedPointOptions {
        tol: s.tol,
        max_iter: s.max_iter,
        damping: s.damping,
        relaxation: s.relaxation,
        guard: s.guard(),
        discretization: config.grid.as_ref().map(|g| g.discretization()).unwrap_or_default(),
    }
}

fn samples(values: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    (values.iter().map(|v| v.re).collect(), values.iter().map(|v| v.im).collect())
}

fn scalar_samples(field: &WaveField) -> Samples {
    let (re, im) = samples(&field.values);
    Samples { re, im, re2: None, im2: None }
}

fn spinor_samples(field: &SpinorField) -> Samples {
    let (re, im) = samples(&field.upper);
    let (re2, im2) = samples(&field.lower);
    Samples {
        re,
        im,
        re2: Some(re2),
        im2: Some(im2),
    }
}

fn solve_reference(
    config: &ScenarioConfig,
    grid: &Grid,
    potential: &PotentialSpec,
    units: &UnitSystem,
    notes: &mut Notes,
) -> Result<Payload, WaveError> {
    let disc = config.grid.as_ref().map(|g| g.discretization()).unwrap_or_default();
    let r = solve_schrodinger_with(grid, potential, config.solver.n_states, units, disc)?;
    if config.solver.perturbation {
        match (r.states.first(), r.energies.first()) {
            (Some(psi), Some(&e)) => notes.put("additional_term", additional_term_report(psi, e, potential, units)?),
            _ => notes.warnings.push("no state available for the additional-term report".into()),
        }
    }
    Ok(linear_spectrum(config, "finite_difference", r, scalar_samples, notes))
}

fn linear_spectrum<S>(
    config: &ScenarioConfig,
    method: &str,
    r: SpectrumResult<S>,
    to_samples: impl Fn(&S) -> Samples,
    notes: &mut Notes,
) -> Payload {
    if r.len() < config.solver.n_states {
        notes
            .warnings
            .push(format!("found {} of {} requested states", r.len(), config.solver.n_states));
    }
    for (k, v) in &r.diagnostics {
        notes.put(k, v);
    }
    let levels = (0..r.len())
        .map(|i| Level {
            index: i,
            energy: r.energies[i],
            node_count: r.node_counts[i],
            self_consistency_residual: None,
            residual: Some(r.residuals[i]),
            iterations: None,
        })
        .collect();
    let states = config
        .output
        .include_states
        .then(|| r.states.iter().map(to_samples).collect());
    Payload::Spectrum {
        method: method.into(),
        levels,
        states,
    }
}

fn spinor_spectrum(config: &ScenarioConfig, method: &str, r: SpectrumResult<SpinorField>, notes: &mut Notes) -> Payload {
    linear_spectrum(config, method, r, spinor_samples, notes)
}

fn modified_spectrum(config: &ScenarioConfig, found: Vec<ModifiedEigenResult>, notes: &mut Notes) -> Payload {
    let method = found
        .first()
        .map(|s| serde_json::to_value(s.method).ok().and_then(|v| v.as_str().map(String::from)))
        .flatten()
        .unwrap_or_else(|| "fixed_point".into());
    notes.put("iterations", found.iter().map(|s| s.iterations).collect::<Vec<_>>());
    let levels = found
        .iter()
        .enumerate()
        .map(|(i, s)| Level {
            index: i,
            energy: s.energy,
            node_count: s.node_count,
            self_consistency_residual: Some(s.self_consistency_residual),
            residual: None,
            iterations: Some(s.iterations),
        })
        .collect();
    let states = config
        .output
        .include_states
        .then(|| found.iter().map(|s| scalar_samples(&s.state)).collect());
    Payload::Spectrum { method, levels, states }
}

fn scan_result(config: &ScenarioConfig, scan: StateScan, lo: f64, hi: f64, notes: &mut Notes) -> Result<Payload, WaveError> {
    if !scan.skipped.is_empty() {
        notes.put("skipped_energies", &scan.skipped);
    }
    if scan.states.is_empty() {
        return Err(WaveError::NoRoot { lo, hi });
    }
    let mut states = scan.states;
    if states.len() > config.solver.n_states {
        notes.warnings.push(format!(
            "{} states in the bracket; reporting the lowest {}",
            states.len(),
            config.solver.n_states
        ));
        states.truncate(config.solver.n_states);
    }
    Ok(modified_spectrum(config, states, notes))
}

fn solve_modified_nr(
    config: &ScenarioConfig,
    grid: &Grid,
    potential: &PotentialSpec,
    units: &UnitSystem,
    notes: &mut Notes,
) -> Result<Payload, WaveError> {
    let s = &config.solver;
    let opts = fixed_point_options(config);
    let samples = s.scan_samples;
    if s.method == Method::Shooting {
        let [lo, hi] = s.bracket.expect("validated: shooting has a bracket");
        let scan = solve_stationary_shooting_with(potential, (lo, hi), s.ends_for(grid), grid, units, samples.max(SHOOTING_SAMPLES))?;
        return scan_result(config, scan, lo, hi, notes);
    }
    match s.inner {
        InnerSolver::Grid => {
            let model = GridModel::new(grid, potential, units, opts.guard, opts.discretization)?;
            fixed_points(config, &model, grid, potential, units, &opts, notes)
        }
        InnerSolver::Exact => {
            let model = PiecewiseModel::new(potential, s.ends_for(grid), grid, units, opts.guard)?;
            fixed_points(config, &model, grid, potential, units, &opts, notes)
        }
    }
}

/// Bracketed: every fixed point in the window. Otherwise state `n` starts
/// from the `n`-th reference level.
fn fixed_points<M: LinearSpectrum>(
    config: &ScenarioConfig,
    model: &M,
    grid: &Grid,
    potential: &PotentialSpec,
    units: &UnitSystem,
    opts: &FixedPointOptions,
    notes: &mut Notes,
) -> Result<Payload, WaveError> {
    let s = &config.solver;
    if let Some([lo, hi]) = s.bracket {
        let scan = discover_fixed_points(model, lo, hi, s.scan_samples, opts)?;
        return scan_result(config, scan, lo, hi, notes);
    }
    let start = solve_schrodinger_with(grid, potential, s.n_states, units, opts.discretization)?;
    notes.put("initial_energies", &start.energies);
    let mut found = Vec::with_capacity(start.len());
    for (n, &e) in start.energies.iter().enumerate() {
        found.push(fixed_point(model, n, e, None, opts)?);
    }
    Ok(modified_spectrum(config, found, notes))
}

fn solve_modified_rel(
    config: &ScenarioConfig,
    grid: &Grid,
    potential: &PotentialSpec,
    units: &UnitSystem,
    notes: &mut Notes,
) -> Result<Payload, WaveError> {
    let s = &config.solver;
    let [lo, hi] = s.bracket.expect("validated: relativistic solves have a bracket");
    let scenario = RelScenario::new(*units, potential.clone(), *grid, s.ends_for(grid))?;
    let scan = solve_rel_stationary_with(&scenario, (lo, hi), s.scan_samples.max(SHOOTING_SAMPLES))?;
    scan_result(config, scan, lo, hi, notes)
}

fn scalar_initial(config: &ScenarioConfig, grid: &Grid, units: &UnitSystem) -> Result<WaveField, WaveError> {
    match config.initial {
        None => Err(WaveError::Config("time-dependent runs need an [initial] block".into())),
        Some(InitialBlock::PlaneWave { p, .. }) => {
            Ok(WaveField::from_fn(grid, |x| Complex64::new(0.0, p * x / units.hbar).exp()).normalized())
        }
        Some(InitialBlock::Gaussian { center, sigma, k0 }) => Ok(gaussian_packet(grid, center, sigma, k0).normalized()),
    }
}

/// Plane waves are `σx` eigenvectors `(1, ±1)/√2`; Gaussians start in the upper component.
fn spinor_initial(config: &ScenarioConfig, grid: &Grid, units: &UnitSystem) -> Result<SpinorField, WaveError> {
    match config.initial {
        None => Err(WaveError::Config("time-dependent runs need an [initial] block".into())),
        Some(InitialBlock::PlaneWave { p, positive }) => {
            let s = if positive { 1.0 } else { -1.0 };
            let field = SpinorField::from_fn(grid, |x| {
                let phase = Complex64::new(0.0, p * x / units.hbar).exp();
                (phase, phase * s)
            });
            Ok(field.normalized())
        }
        Some(InitialBlock::Gaussian { center, sigma, k0 }) => {
            let g = gaussian_packet(grid, center, sigma, k0);
            SpinorField::new(grid, g.values, vec![Complex64::new(0.0, 0.0); grid.len()]).map(|f| f.normalized())
        }
    }
}

/// `∂ψ/∂t = −iε/ħ ψ` at `t = 0`.
fn phase_derivative(psi: &WaveField, epsilon: f64, units: &UnitSystem) -> WaveField {
    psi.scaled(Complex64::new(0.0, -epsilon / units.hbar))
}

fn propagate_modified_nr(
    config: &ScenarioConfig,
    grid: &Grid,
    potential: &PotentialSpec,
    units: &UnitSystem,
    notes: &mut Notes,
) -> Result<Payload, WaveError> {
    let s = &config.solver;
    let energy = s.energy.expect("validated: modified_nr_timedep has an energy");
    let epsilon = s
        .epsilon
        .or_else(|| plane_wave_momentum(config).map(|p| p * p / (2.0 * units.mass)))
        .ok_or_else(|| WaveError::Config("`solver.epsilon` is required unless the initial data is a plane wave".into()))?;
    notes.put("epsilon", epsilon);
    let step = s.stepping().map_err(WaveError::Config)?;
    let psi0 = scalar_initial(config, grid, units)?;
    let state = TimeDepState::new(psi0.clone(), phase_derivative(&psi0, epsilon, units), energy, epsilon)?;
    let run = propagate_timedep(&state, potential, step.dt, step.steps, units)?;
    Ok(scalar_trajectory(
        config,
        &run.trajectory,
        Some(run.dt_limit),
        Some(run.max_energy_drift()),
    ))
}

fn propagate_modified_rel(
    config: &ScenarioConfig,
    grid: &Grid,
    potential: &PotentialSpec,
    units: &UnitSystem,
    notes: &mut Notes,
) -> Result<Payload, WaveError> {
    let s = &config.solver;
    let epsilon = rel_epsilon(config, units)
        .ok_or_else(|| WaveError::Config("`solver.epsilon` is required unless the initial data is a plane wave".into()))?;
    notes.put("epsilon", epsilon);
    if let Some(energy) = s.energy {
        let check = check_epsilon(potential, grid, energy, epsilon)?;
        if check.conflict {
            notes.warnings.push(format!(
                "E − V(x) departs from ε by up to {:.3e}; ε is held fixed",
                check.max_deviation
            ));
        }
        notes.put("epsilon_check", check);
    }
    let step = s.stepping().map_err(WaveError::Config)?;
    let scenario = RelScenario::new(*units, potential.clone(), *grid, s.ends_for(grid))?;
    let phi0 = scalar_initial(config, grid, units)?;
    let run = propagate_rel_timedep(&phi0, &phase_derivative(&phi0, epsilon, units), &scenario, step.dt, step.steps)?;
    if step.dt > run.dt_limit {
        notes
            .warnings
            .push(format!("dt = {} exceeds the estimated stability limit {:.6e}", step.dt, run.dt_limit));
    }
    Ok(scalar_trajectory(config, &run.trajectory, Some(run.dt_limit), None))
}

fn summary<S>(config: &ScenarioConfig, traj: &Trajectory<S>, dt_limit: Option<f64>, energy_drift: Option<f64>) -> TrajectorySummary {
    TrajectorySummary {
        steps: traj.frames.len() - 1,
        dt: traj.dt,
        final_time: *traj.times.last().expect("trajectory holds the initial frame"),
        initial_norm: traj.norms[0],
        final_norm: *traj.norms.last().expect("trajectory holds the initial frame"),
        max_norm_drift: traj.max_norm_drift(),
        dt_limit,
        max_wave_energy_drift: energy_drift,
        frame_stride: config.output.frame_stride,
    }
}

fn frames<S>(config: &ScenarioConfig, traj: &Trajectory<S>, to_samples: impl Fn(&S) -> Samples) -> Vec<Frame> {
    traj.frames
        .iter()
        .zip(&traj.times)
        .step_by(config.output.frame_stride)
        .map(|(f, &t)| Frame { t, field: to_samples(f) })
        .collect()
}

fn scalar_trajectory(config: &ScenarioConfig, traj: &Trajectory, dt_limit: Option<f64>, energy_drift: Option<f64>) -> Payload {
    Payload::Trajectory {
        summary: summary(config, traj, dt_limit, energy_drift),
        x: traj.frames[0].grid.points(),
        frames: frames(config, traj, scalar_samples),
    }
}

fn spinor_trajectory(config: &ScenarioConfig, traj: &Trajectory<SpinorField>) -> Payload {
    Payload::Trajectory {
        summary: summary(config, traj, None, None),
        x: traj.frames[0].grid.points(),
        frames: frames(config, traj, spinor_samples),
    }
}

fn constant_value(spec: &PotentialSpec) -> f64 {
    match &spec.shape {
        PotentialShape::PiecewiseConstant { values, .. } => values[0],
        _ => 0.0,
    }
}

/// Calibration residuals, then each modified equation's plane-wave residual at
/// the energy of its standard counterpart (`p²/2m + V`, `V ± √(c²p² + E0²)`, `V ± cp`).
fn dispersion(config: &ScenarioConfig, units: &UnitSystem, notes: &mut Notes) -> Result<Payload, WaveError> {
    let v = constant_value(&config.potential.spec);
    notes.put("potential", v);
    let mut rows = Vec::new();
    for &p in &config.solver.momenta {
        for c in calibration_residuals(p, units)? {
            rows.push(DispersionRow {
                table: "calibration".into(),
                p,
                relative: Some(c.relative()),
                name: c.constant,
                value: c.value,
                residual: c.residual,
            });
        }
        let e_nr = p * p / (2.0 * units.mass);
        let e_kg = klein_gordon_energy(p, units.rest_energy, units.c);
        let e_ml = units.c * p;
        let nr = PlaneWaveState::free_nr(p, units).with_potential(v).with_energy(e_nr + v);
        let rel = PlaneWaveState::free_rel(p, units).with_potential(v).with_energy(e_kg + v);
        let checks: [(&str, f64, Result<f64, WaveError>); 8] = [
            ("nr_stationary", nr.energy, residual_nr_stationary(&nr, units)),
            ("nr_timedep", nr.energy, residual_nr_timedep(&nr, units)),
            ("rel_stationary", rel.energy, residual_rel_stationary(&rel, units)),
            ("rel_timedep", rel.energy, residual_rel_timedep(&rel, units)),
            ("spin_half_positive", v + e_kg, residual_spin_half(&rel.with_energy(v + e_kg), units, Branch::Positive)),
            ("spin_half_negative", v - e_kg, residual_spin_half(&rel.with_energy(v - e_kg), units, Branch::Negative)),
            ("massless_positive", v + e_ml, residual_massless(&rel.with_energy(v + e_ml), units, Branch::Positive)),
            ("massless_negative", v - e_ml, residual_massless(&rel.with_energy(v - e_ml), units, Branch::Negative)),
        ];
        for (name, energy, r) in checks {
            match r {
                Ok(residual) => rows.push(DispersionRow {
                    table: "residual".into(),
                    p,
                    name: name.into(),
                    value: energy,
                    residual,
                    relative: None,
                }),
                Err(e) => notes.warnings.push(format!("{name} at p = {p}: {e}")),
            }
        }
    }
    Ok(Payload::Dispersion { rows })
}
