//! One-parameter sweeps: a scenario document plus a `[sweep]` table.
//!
//! ```toml
//! [sweep]
//! parameter = "potential.depth"
//! values = [2.0, 4.0, 8.0]
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::config::{emit, parse_table, suggest, ConfigErrors, ScenarioConfig};
use crate::report::{RunReport, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_OK};
use crate::run::{run_scenario, Command};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub base: ScenarioConfig,
    /// Dotted path into the normalized scenario, e.g. `solver.tol`.
    pub parameter: String,
    pub values: Vec<f64>,
}

/// One aggregation row; `digest` is the cell report's digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub status: String,
    pub exit_code: i32,
    pub first_energy: Option<f64>,
    pub digest: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
    pub reports: Vec<RunReport>,
}

impl SweepOutcome {
    /// 0 when any cell succeeded, else 3.
    pub fn exit_code(&self) -> i32 {
        if self.rows.iter().any(|r| r.exit_code == EXIT_OK) {
            EXIT_OK
        } else {
            EXIT_NONCONVERGENCE
        }
    }
}

const SWEEP_KEYS: &[&str] = &["parameter", "values"];

fn lookup<'a>(table: &'a Table, path: &str) -> Result<&'a Value, String> {
    let mut current = table;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let keys: Vec<&str> = current.keys().map(String::as_str).collect();
        let Some(v) = current.get(*part) else {
            let so_far = parts[..i].join(".");
            let hint = suggest(part, &keys)
                .map(|s| {
                    let full = if so_far.is_empty() { s.to_string() } else { format!("{so_far}.{s}") };
                    format!("; did you mean `{full}`?")
                })
                .unwrap_or_default();
            return Err(format!("sweep parameter `{path}` does not exist in the scenario{hint}"));
        };
        if i + 1 == parts.len() {
            return Ok(v);
        }
        match v {
            Value::Table(t) => current = t,
            _ => return Err(format!("sweep parameter `{path}`: `{}` is not a table", parts[..=i].join("."))),
        }
    }
    Err(format!("sweep parameter `{path}` is empty"))
}

fn set(table: &mut Table, path: &str, value: Value) {
    let mut parts = path.split('.').peekable();
    let mut current = table;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            current.insert(part.to_string(), value);
            return;
        }
        current = match current.get_mut(part) {
            Some(Value::Table(t)) => t,
            _ => return,
        };
    }
}

pub fn parse_sweep(text: &str) -> Result<SweepPlan, ConfigErrors> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigErrors(vec![format!("malformed document: {}", e.message().trim())]))?;
    let mut errs = Vec::new();
    let sweep = match table.remove("sweep") {
        Some(Value::Table(t)) => Some(t),
        Some(other) => {
            errs.push(format!("`sweep` must be a table, got {}", other.type_str()));
            None
        }
        None => {
            errs.push("missing block [sweep]".into());
            None
        }
    };
    let base = parse_table(&table).map_err(|e| errs.extend(e.0)).ok();

    let mut parameter = None;
    let mut values = None;
    if let Some(sweep) = &sweep {
        for key in sweep.keys().filter(|k| !SWEEP_KEYS.contains(&k.as_str())) {
            errs.push(match suggest(key, SWEEP_KEYS) {
                Some(s) => format!("key `sweep.{key}` is not recognized; did you mean `sweep.{s}`?"),
                None => format!("key `sweep.{key}` is not recognized; allowed: {}", SWEEP_KEYS.join(", ")),
            });
        }
        match sweep.get("parameter") {
            Some(Value::String(p)) => parameter = Some(p.clone()),
            Some(other) => errs.push(format!("`sweep.parameter` must be a string, got {}", other.type_str())),
            None => errs.push("missing `sweep.parameter`".into()),
        }
        match sweep.get("values") {
            Some(Value::Array(a)) if a.is_empty() => errs.push("`sweep.values` is empty".into()),
            Some(Value::Array(a)) => {
                let nums: Option<Vec<f64>> = a
                    .iter()
                    .map(|v| match v {
                        Value::Float(f) => Some(*f),
                        Value::Integer(i) => Some(*i as f64),
                        _ => None,
                    })
                    .collect();
                match nums {
                    Some(n) => values = Some(n),
                    None => errs.push("`sweep.values` must hold numbers only".into()),
                }
            }
            Some(other) => errs.push(format!("`sweep.values` must be an array, got {}", other.type_str())),
            None => errs.push("missing `sweep.values`".into()),
        }
    }

    if let (Some(base), Some(p)) = (&base, &parameter) {
        let normalized: Table = emit(base).parse().expect("emitted configs parse");
        match lookup(&normalized, p) {
            Ok(Value::Float(_) | Value::Integer(_)) => {}
            Ok(other) => errs.push(format!("sweep parameter `{p}` is a {}, not a number", other.type_str())),
            Err(e) => errs.push(e),
        }
    }
    match (base, parameter, values) {
        (Some(base), Some(parameter), Some(values)) if errs.is_empty() => Ok(SweepPlan { base, parameter, values }),
        _ => Err(ConfigErrors(errs)),
    }
}

/// The scenario for one value, or the configuration errors it produces.
fn cell_config(plan: &SweepPlan, value: f64) -> Result<ScenarioConfig, ConfigErrors> {
    let mut table: Table = emit(&plan.base).parse().expect("emitted configs parse");
    let slot = match lookup(&table, &plan.parameter) {
        Ok(Value::Integer(_)) => {
            if value.fract() != 0.0 {
                return Err(ConfigErrors(vec![format!("`{}` takes integers, got {value}", plan.parameter)]));
            }
            Value::Integer(value as i64)
        }
        _ => Value::Float(value),
    };
    set(&mut table, &plan.parameter, slot);
    parse_table(&table)
}

fn config_error_row(index: usize, value: f64, errs: &ConfigErrors) -> SweepRow {
    SweepRow {
        index,
        value,
        status: "error".into(),
        exit_code: EXIT_CONFIG,
        first_energy: None,
        digest: None,
        error: Some(errs.0.join("; ")),
    }
}

/// Runs every cell on a pool of `jobs` threads; rows come back in value order.
pub fn run_sweep(plan: &SweepPlan, command: Command, jobs: usize) -> Result<SweepOutcome, String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| format!("cannot start {jobs} worker threads: {e}"))?;
    let cells: Vec<(SweepRow, Option<RunReport>)> = pool.install(|| {
        plan.values
            .par_iter()
            .enumerate()
            .map(|(index, &value)| match cell_config(plan, value) {
                Err(errs) => (config_error_row(index, value, &errs), None),
                Ok(config) => {
                    let report = run_scenario(&config, command);
                    let row = SweepRow {
                        index,
                        value,
                        status: if report.exit_code == EXIT_OK { "ok" } else { "error" }.into(),
                        exit_code: report.exit_code,
                        first_energy: report.first_energy(),
                        digest: Some(report.digest()),
                        error: report.error.as_ref().map(|e| e.message.clone()),
                    };
                    (row, Some(report))
                }
            })
            .collect()
    });
    let (rows, reports): (Vec<_>, Vec<_>) = cells.into_iter().unzip();
    Ok(SweepOutcome {
        parameter: plan.parameter.clone(),
        rows,
        reports: reports.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"
equation = "schrodinger"
[potential]
kind = "square_well"
depth = 1.0
half_width = 1.0
[grid]
x_min = -4.0
x_max = 4.0
n_points = 200
[solver]
n_states = 1
[sweep]
parameter = "potential.depth"
values = [2.0, 4.0]
"#;

    #[test]
    fn parses_and_runs_in_order() {
        let plan = parse_sweep(DOC).unwrap();
        assert_eq!(plan.values, vec![2.0, 4.0]);
        let out = run_sweep(&plan, Command::Solve, 2).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert!(out.rows[0].first_energy.unwrap() > out.rows[1].first_energy.unwrap());
        assert_eq!(out.exit_code(), 0);
    }

    #[test]
    fn unknown_parameter_gets_a_suggestion() {
        let e = parse_sweep(&DOC.replace("potential.depth", "potential.dept")).unwrap_err();
        assert!(e.0[0].contains("did you mean `potential.depth`"), "{e}");
    }

    #[test]
    fn integer_parameters_reject_fractions() {
        let doc = DOC.replace("potential.depth", "grid.n_points").replace("[2.0, 4.0]", "[100, 150.5]");
        let out = run_sweep(&parse_sweep(&doc).unwrap(), Command::Solve, 1).unwrap();
        assert_eq!(out.rows[0].exit_code, 0);
        assert_eq!(out.rows[1].exit_code, EXIT_CONFIG);
    }
}
