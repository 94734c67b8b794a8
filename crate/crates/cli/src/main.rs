use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wavekit_cli::compare::compare_reports;
use wavekit_cli::config::{parse_scenario, Format};
use wavekit_cli::output::{payload_csv, rows_csv};
use wavekit_cli::report::{ErrorObject, RunReport, EXIT_CONFIG};
use wavekit_cli::run::{run_scenario, Command};
use wavekit_cli::sweep::{parse_sweep, run_sweep};

#[derive(Parser)]
#[command(name = "wavekit", version, about = "Run modified and reference wave-equation scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// Scenario (or sweep) document.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads for `sweep`.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Keep every K-th trajectory frame.
    #[arg(long, global = true, value_name = "K")]
    frame_stride: Option<usize>,
    /// Print nothing to stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Subcommand)]
enum Sub {
    /// Stationary states.
    Solve,
    /// Time evolution.
    Propagate,
    /// Plane-wave calibration and dispersion residuals.
    Dispersion,
    /// Per-level deltas between two spectrum reports (JSON).
    Compare { a: PathBuf, b: PathBuf },
    /// Run a scenario once per value of one parameter.
    Sweep,
}

fn fail(message: &str, code: i32) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code as u8)
}

fn emit(text: &str, out: Option<&Path>, quiet: bool) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None if quiet => Ok(()),
        None => {
            let mut stdout = std::io::stdout().lock();
            let newline = if text.ends_with('\n') { "" } else { "\n" };
            match write!(stdout, "{text}{newline}").and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(format!("cannot write to stdout: {e}")),
                _ => Ok(()),
            }
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn config_text(flags: &Flags) -> Result<String, String> {
    let path = flags.config.as_deref().ok_or("this command needs --config PATH")?;
    read(path)
}

/// Config errors still produce a machine-readable object when an output path is known.
fn config_failure(messages: &[String], out: Option<&Path>) -> ExitCode {
    for m in messages {
        eprintln!("error: {m}");
    }
    if let Some(path) = out {
        let obj = serde_json::json!({ "status": "error", "exit_code": EXIT_CONFIG, "error": ErrorObject::config(messages) });
        let _ = std::fs::write(path, serde_json::to_string_pretty(&obj).expect("json values serialize"));
    }
    ExitCode::from(EXIT_CONFIG as u8)
}

fn scenario(flags: &Flags, command: Command) -> ExitCode {
    let text = match config_text(flags) {
        Ok(t) => t,
        Err(e) => return fail(&e, EXIT_CONFIG),
    };
    let mut config = match parse_scenario(&text) {
        Ok(c) => c,
        Err(errs) => return config_failure(&errs.0, flags.out.as_deref()),
    };
    if let Some(k) = flags.frame_stride {
        if k == 0 {
            return fail("--frame-stride must be >= 1", EXIT_CONFIG);
        }
        config.output.frame_stride = k;
    }
    let out = flags.out.clone().or_else(|| config.output.path.as_ref().map(PathBuf::from));
    let format = flags.format.map(Format::from).unwrap_or(config.output.format);
    let report = run_scenario(&config, command);
    if let Some(e) = &report.error {
        eprintln!("error: {}", e.message);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let written = match format {
        Format::Json => emit(&report.to_json(), out.as_deref(), flags.quiet),
        Format::Csv => {
            let sidecar = out.as_ref().map(|p| p.with_extension("report.json"));
            emit(&report.to_json(), sidecar.as_deref(), true)
                .and_then(|_| match payload_csv(&report) {
                    Some(table) => emit(&table, out.as_deref(), flags.quiet),
                    None => Ok(()),
                })
        }
    };
    if let Err(e) = written {
        return fail(&e, EXIT_CONFIG);
    }
    ExitCode::from(report.exit_code as u8)
}

fn compare(flags: &Flags, a: &Path, b: &Path) -> ExitCode {
    let load = |p: &Path| -> Result<RunReport, String> {
        RunReport::from_json(&read(p)?).map_err(|e| format!("{} is not a run report: {e}", p.display()))
    };
    let (ra, rb) = match (load(a), load(b)) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => return fail(&e, EXIT_CONFIG),
    };
    let delta = match compare_reports(&ra, &rb) {
        Ok(d) => d,
        Err(e) => return fail(&e.to_string(), EXIT_CONFIG),
    };
    for w in &delta.warnings {
        eprintln!("warning: {w}");
    }
    let text = match flags.format {
        Some(FormatArg::Csv) => rows_csv(&delta.levels).map_err(|e| e.to_string()),
        _ => Ok(serde_json::to_string_pretty(&delta).expect("compare reports serialize")),
    };
    match text.and_then(|t| emit(&t, flags.out.as_deref(), flags.quiet)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e, EXIT_CONFIG),
    }
}

fn sweep(flags: &Flags) -> ExitCode {
    let text = match config_text(flags) {
        Ok(t) => t,
        Err(e) => return fail(&e, EXIT_CONFIG),
    };
    let mut plan = match parse_sweep(&text) {
        Ok(p) => p,
        Err(errs) => return config_failure(&errs.0, flags.out.as_deref()),
    };
    if let Some(k) = flags.frame_stride {
        plan.base.output.frame_stride = k.max(1);
    }
    let jobs = flags
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let outcome = match run_sweep(&plan, Command::default_for(plan.base.equation), jobs) {
        Ok(o) => o,
        Err(e) => return fail(&e, EXIT_CONFIG),
    };
    for r in outcome.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("warning: cell {} ({} = {}): {}", r.index, outcome.parameter, r.value, r.error.as_deref().unwrap_or(""));
    }
    let text = match flags.format {
        Some(FormatArg::Json) => Ok(serde_json::to_string_pretty(&outcome).expect("sweep outcomes serialize")),
        _ => rows_csv(&outcome.rows).map_err(|e| e.to_string()),
    };
    match text.and_then(|t| emit(&t, flags.out.as_deref(), flags.quiet)) {
        Ok(()) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => fail(&e, EXIT_CONFIG),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match &cli.command {
        Sub::Solve => scenario(&cli.flags, Command::Solve),
        Sub::Propagate => scenario(&cli.flags, Command::Propagate),
        Sub::Dispersion => scenario(&cli.flags, Command::Dispersion),
        Sub::Compare { a, b } => compare(&cli.flags, a, b),
        Sub::Sweep => sweep(&cli.flags),
    }
}
