use std::f64::consts::PI;
use std::path::Path;
use std::process::Command as Process;

use proptest::prelude::*;
use wavekit_cli::compare::compare_reports;
use wavekit_cli::config::{emit, parse_scenario, ScenarioConfig};
use wavekit_cli::report::{Payload, RunReport};
use wavekit_cli::run::{run_scenario, Command};
use wavekit_cli::sweep::{parse_sweep, run_sweep};

const BIN: &str = env!("CARGO_BIN_EXE_wavekit");

fn wavekit(args: &[&str], dir: &Path) -> (i32, String, String) {
    let out = Process::new(BIN).args(args).current_dir(dir).output().expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const FREE_BOX: &str = r#"
equation = "modified_nr_stationary"
[potential]
kind = "free"
[grid]
x_min = 0.0
x_max = 1.0
n_points = 1024
[solver]
n_states = 4
"#;

const HARMONIC: &str = r#"
equation = "modified_nr_stationary"
[potential]
kind = "harmonic"
omega = 1.0
[grid]
x_min = -8.0
x_max = 8.0
n_points = 400
"#;

const WELL: &str = r#"
equation = "modified_nr_stationary"
[potential]
kind = "square_well"
depth = 4.0
half_width = 1.0
[grid]
x_min = -4.0
x_max = 4.0
n_points = 400
[solver]
n_states = 1
"#;

const WELL_BRACKETED: &str = r#"
equation = "modified_nr_stationary"
[potential]
kind = "square_well"
depth = 4.0
half_width = 1.0
[grid]
x_min = -4.0
x_max = 4.0
n_points = 400
[solver]
n_states = 3
inner = "exact"
bracket = [-3.9, -1e-4]
"#;

#[test]
fn free_box_matches_the_infinite_well() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "free.toml", FREE_BOX);
    let (code, stdout, _) = wavekit(&["solve", "--config", &cfg], dir.path());
    assert_eq!(code, 0);
    let report = RunReport::from_json(&stdout).unwrap();
    let Some(Payload::Spectrum { levels, .. }) = report.payload else { panic!("spectrum expected") };
    assert_eq!(levels.len(), 4);
    for (i, l) in levels.iter().enumerate() {
        let n = (i + 1) as f64;
        let exact = n * n * PI * PI / 2.0;
        assert!(((l.energy - exact) / exact).abs() < 1e-3, "level {i}: {} vs {exact}", l.energy);
        assert_eq!(l.node_count, i);
    }
}

#[test]
fn harmonic_with_reject_exits_4_with_turning_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.toml", HARMONIC);
    let out = dir.path().join("h.json");
    let (code, _, stderr) = wavekit(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(code, 4, "{stderr}");
    let report = RunReport::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let err = report.error.unwrap();
    assert_eq!(err.kind, "singular_region");
    let e = err.details["energy"].as_f64().unwrap();
    let locs: Vec<f64> = err.details["set"]["locations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let x = (2.0 * e).sqrt();
    assert_eq!(locs.len(), 2);
    assert!((locs[0] + x).abs() < 1e-9 && (locs[1] - x).abs() < 1e-9, "{locs:?} vs ±{x}");
}

#[test]
fn one_iteration_exits_3_with_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "w.toml", &format!("{WELL}max_iter = 1\n"));
    let (code, stdout, _) = wavekit(&["solve", "--config", &cfg], dir.path());
    assert_eq!(code, 3);
    let report = RunReport::from_json(&stdout).unwrap();
    let err = report.error.unwrap();
    assert_eq!(err.kind, "non_convergence");
    assert_eq!(err.details["history"].as_array().unwrap().len(), 1);
}

#[test]
fn config_errors_exit_2_and_name_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = FREE_BOX
        .replace("modified_nr_stationary", "modified_nr_stationarry")
        .replace("n_states = 4", "n_states = 4\ntol = -1.0");
    let cfg = write(dir.path(), "bad.toml", &bad);
    let (code, _, stderr) = wavekit(&["solve", "--config", &cfg], dir.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("did you mean `modified_nr_stationary`"), "{stderr}");
    assert!(stderr.contains("solver.tol"), "{stderr}");
}

#[test]
fn mode_mismatch_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "free.toml", FREE_BOX);
    let (code, _, stderr) = wavekit(&["propagate", "--config", &cfg], dir.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("use `solve`"), "{stderr}");
}

#[test]
fn nonzero_vector_potential_is_out_of_scope() {
    let text = r#"
equation = "modified_rel_stationary"
[units]
c = 1.0
[potential]
kind = "square_well"
depth = 0.2
half_width = 1.0
electrostatic = true
vector_potential = [0.0, 0.1, 0.0]
[grid]
x_min = -4.0
x_max = 4.0
n_points = 200
[solver]
bracket = [0.8, 1.0]
"#;
    let report = run_scenario(&parse_scenario(text).unwrap(), Command::Solve);
    assert_eq!(report.exit_code, 2);
    assert_eq!(report.error.unwrap().kind, "out_of_scope");
}

#[test]
fn identical_configs_give_identical_digests() {
    let config = parse_scenario(WELL_BRACKETED).unwrap();
    let a = run_scenario(&config, Command::Solve);
    assert_eq!(a.exit_code, 0);
    let b = run_scenario(&config, Command::Solve);
    assert_eq!(a.digest(), b.digest());
    assert_eq!(a.input_digest, b.input_digest);
    let round = RunReport::from_json(&a.to_json()).unwrap();
    assert_eq!(round.digest(), a.digest());
}

#[test]
fn compare_self_is_zero_and_lengths_may_differ() {
    let a = run_scenario(&parse_scenario(WELL_BRACKETED).unwrap(), Command::Solve);
    let d = compare_reports(&a, &a).unwrap();
    assert!(d.levels.iter().all(|l| l.delta == 0.0));
    assert!(d.max_overlap_deficit.unwrap() < 1e-12);

    let schro = WELL.replace("modified_nr_stationary", "schrodinger").replace("n_states = 1", "n_states = 2");
    let b = run_scenario(&parse_scenario(&schro).unwrap(), Command::Solve);
    let d = compare_reports(&b, &a).unwrap();
    assert_eq!(d.levels.len(), 2);
    assert_eq!(d.warnings.len(), 1);
    assert!(d.levels[0].delta != 0.0);
}

#[test]
fn compare_rejects_incompatible_payloads() {
    let a = run_scenario(&parse_scenario(WELL_BRACKETED).unwrap(), Command::Solve);
    let failed = run_scenario(&parse_scenario(HARMONIC).unwrap(), Command::Solve);
    assert!(compare_reports(&a, &failed).is_err());
}

const SWEEP: &str = r#"
equation = "modified_nr_stationary"
[potential]
kind = "square_well"
depth = 2.0
half_width = 1.0
[grid]
x_min = -4.0
x_max = 4.0
n_points = 400
[solver]
n_states = 1
inner = "exact"
bracket = [-7.9, -1e-4]
[sweep]
parameter = "potential.depth"
values = [2.0, 4.0, 8.0]
"#;

#[test]
fn sweep_rows_follow_the_values() {
    let out = run_sweep(&parse_sweep(SWEEP).unwrap(), Command::Solve, 2).unwrap();
    assert_eq!(out.rows.len(), 3);
    for (row, depth) in out.rows.iter().zip([2.0, 4.0, 8.0]) {
        assert_eq!(row.status, "ok");
        let e = row.first_energy.unwrap();
        assert!(e > -depth && e < 0.0, "{e} outside (-{depth}, 0)");
    }
}

#[test]
fn sweep_output_is_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SWEEP);
    let (c1, one, _) = wavekit(&["sweep", "--config", &cfg, "--jobs", "1"], dir.path());
    let (c8, eight, _) = wavekit(&["sweep", "--config", &cfg, "--jobs", "8"], dir.path());
    assert_eq!((c1, c8), (0, 0));
    assert_eq!(one, eight);
    assert_eq!(one.lines().count(), 4);
}

#[test]
fn sweep_failures_are_recorded_in_row() {
    let doc = SWEEP.replace("[2.0, 4.0, 8.0]", "[4.0, 0.0]");
    let out = run_sweep(&parse_sweep(&doc).unwrap(), Command::Solve, 2).unwrap();
    assert_eq!(out.rows[0].exit_code, 0);
    assert_ne!(out.rows[1].exit_code, 0);
    assert!(out.rows[1].error.is_some());
    assert_eq!(out.exit_code(), 0);
}

#[test]
fn empty_sweep_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &SWEEP.replace("[2.0, 4.0, 8.0]", "[]"));
    let (code, _, stderr) = wavekit(&["sweep", "--config", &cfg], dir.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("sweep.values"), "{stderr}");
}

#[test]
fn csv_spectrum_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "free.toml", FREE_BOX);
    let out = dir.path().join("free.csv");
    let (code, _, _) = wavekit(&["solve", "--config", &cfg, "--format", "csv", "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "index,energy,node_count,self_consistency_residual");
    assert_eq!(text.lines().count(), 5);
    assert!(dir.path().join("free.report.json").exists());
}

#[test]
fn csv_frames_have_spinor_columns_and_stride() {
    let text = r#"
equation = "massless_spin_half"
[units]
c = 1.0
[potential]
kind = "free"
[grid]
x_min = -10.0
x_max = 10.0
n_points = 100
boundary = "periodic"
[solver]
dt = 0.01
steps = 20
[initial]
kind = "gaussian"
center = 0.0
sigma = 1.0
"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.toml", text);
    let (code, stdout, _) = wavekit(&["propagate", "--config", &cfg, "--format", "csv", "--frame-stride", "5"], dir.path());
    assert_eq!(code, 0);
    let mut lines = stdout.lines();
    assert_eq!(lines.next().unwrap(), "t,x,re_psi,im_psi,re_psi2,im_psi2");
    // frames 0, 5, 10, 15, 20
    assert_eq!(lines.count(), 5 * 100);
}

fn arb_config() -> impl Strategy<Value = ScenarioConfig> {
    let equation = prop::sample::select(vec![
        "schrodinger",
        "modified_nr_stationary",
        "modified_nr_timedep",
        "modified_rel_timedep",
        "spin_half_stationary",
        "massless_spin_half",
    ]);
    let potential = prop_oneof![
        Just("kind = \"free\"".to_string()),
        (0.1f64..50.0, 0.1f64..3.0).prop_map(|(d, w)| format!("kind = \"square_well\"\ndepth = {d:?}\nhalf_width = {w:?}")),
        (0.1f64..5.0).prop_map(|o| format!("kind = \"harmonic\"\nomega = {o:?}")),
        (-2.0f64..2.0, 0.0f64..5.0)
            .prop_map(|(e, h)| format!("kind = \"step\"\nedge = {e:?}\nheight = {h:?}\ncenter = 0.25")),
    ];
    (
        equation,
        potential,
        8usize..3000,
        prop::bool::ANY,
        1e-14f64..1e-3,
        1usize..500,
        0.01f64..1.0,
        prop::option::of(0.5f64..200.0),
        1usize..50,
    )
        .prop_map(|(eq, pot, n, periodic, tol, max_iter, damping, c, stride)| {
            let c = c.map(|c| format!("c = {c:?}\n")).unwrap_or_default();
            let boundary = if periodic { "periodic" } else { "dirichlet" };
            let n = if periodic { n + n % 2 } else { n };
            let text = format!(
                "equation = \"{eq}\"\n[units]\nhbar = 1.5\n{c}[potential]\n{pot}\n[grid]\nx_min = -5.0\nx_max = 5.0\nn_points = {n}\nboundary = \"{boundary}\"\n[solver]\ntol = {tol:?}\nmax_iter = {max_iter}\ndamping = {damping:?}\nenergy = 1.5\ndt = 0.001\nsteps = 10\n[initial]\nkind = \"plane_wave\"\np = 1.0\n[output]\nframe_stride = {stride}\n"
            );
            parse_scenario(&text).unwrap_or_else(|e| panic!("{e}\n{text}"))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn emit_then_parse_is_identity(config in arb_config()) {
        let text = emit(&config);
        let back = parse_scenario(&text).unwrap();
        prop_assert_eq!(back, config);
    }
}
