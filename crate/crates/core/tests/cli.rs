use std::path::Path;
use std::process::Command as Process;

use chemoflow::cli_io::*;
use chemoflow::Error;

const BASE: &str = r#"[grid]
dim = 2
points = 16
half_width = 4.0

[exponents]
p = 4
q = 3
r = 4

[time]
t_max = 1.0
count = 6

[solver]
quad_nodes = 8

[data]
profile = "gaussian"
amplitude = 1e-3
variance = 0.5
"#;

const WORKED: &str = r#"[grid]
dim = 3
points = 8
half_width = 2.0

[exponents]
p = 4
q = 3
r = 4
p1 = "8/3"
q1 = 2
r1 = "8/3"
n1 = 2

[time]
t_max = 1.0
count = 6

[data]
profile = "zero"
"#;

fn with(base: &str, from: &str, to: &str) -> String {
    assert!(base.contains(from), "{from}");
    base.replacen(from, to, 1)
}

fn bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_chemoflow"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn fractions_and_defaults_are_parsed() {
    let cfg = load_config_str(WORKED).unwrap();
    let e = cfg.exponent_set().unwrap();
    assert_eq!(e.p1, 8.0 / 3.0);
    assert_eq!(e.q1, 2.0);
    assert_eq!(cfg.solver.quad_nodes, 32);
    assert_eq!(cfg.solver.sampling, SamplingKind::Dyadic);
    assert_eq!(cfg.output.dir, Path::new("out"));
    let g = cfg.grid().unwrap();
    let tg = cfg.time_grid(&g).unwrap();
    assert_eq!(tg.t0(), g.spacing().powi(2));
    assert!((tg.times().last().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn syntax_errors_carry_a_line_number() {
    let text = with(BASE, "count = 6", "count = = 6");
    match ScenarioConfig::parse(&text) {
        Err(Error::Config { line, .. }) => assert_eq!(line, Some(13)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_and_unknown_keys_are_named() {
    let text = with(BASE, "count = 6\n", "");
    let msg = ScenarioConfig::parse(&text).unwrap_err().to_string();
    assert!(msg.contains("count"), "{msg}");
    let text = with(BASE, "count = 6", "count = 6\nt_mx = 3.0");
    let msg = ScenarioConfig::parse(&text).unwrap_err().to_string();
    assert!(msg.contains("t_mx"), "{msg}");
}

#[test]
fn bad_fraction_is_rejected() {
    let text = with(BASE, "p = 4", "p = \"four\"");
    let msg = ScenarioConfig::parse(&text).unwrap_err().to_string();
    assert!(msg.contains("four"), "{msg}");
}

#[test]
fn partial_subindices_are_rejected() {
    let text = with(BASE, "r = 4\n", "r = 4\np1 = 2\n");
    assert!(matches!(ScenarioConfig::parse(&text).unwrap().exponent_set(), Err(Error::Config { .. })));
}

#[test]
fn time_section_needs_exactly_one_extent() {
    let text = with(BASE, "t_max = 1.0", "t_max = 1.0\nratio = 2.0");
    let cfg = ScenarioConfig::parse(&text).unwrap();
    assert!(cfg.time_grid(&cfg.grid().unwrap()).is_err());
}

#[test]
fn inadmissible_exponents_name_the_failed_clause() {
    let text = with(with(WORKED, "q = 3", "q = 1").as_str(), "q1 = 2", "q1 = 1");
    match load_config_str(&text) {
        Err(Error::Inadmissible(f)) => assert!(f.iter().any(|s| s.contains("(i) q-range")), "{f:?}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn check_reports_admissibility_without_solving() {
    let cfg = ScenarioConfig::parse(WORKED).unwrap();
    let out = run_scenario(&cfg, Command::Check, &RunOptions::default());
    assert_eq!(out.report.status, Status::Pass);
    assert!(out.report.verdicts[0].detail.contains("ii"));
    assert!(out.tables.is_empty());
}

#[test]
fn zero_data_solve_converges_immediately() {
    let cfg = ScenarioConfig::parse(WORKED).unwrap();
    let out = run_scenario(&cfg, Command::Solve, &RunOptions::default());
    assert_eq!(out.report.status, Status::Pass, "{:?}", out.report.error);
    let trace = out.report.trace.unwrap();
    assert_eq!(trace.iterations(), 1);
    assert_eq!(out.report.mass_drift, Some(0.0));
}

#[test]
fn constants_report_lists_the_table() {
    let cfg = ScenarioConfig::parse(BASE).unwrap();
    let out = run_scenario(&cfg, Command::Constants, &RunOptions::default());
    assert_ne!(out.report.status, Status::Error, "{:?}", out.report.error);
    let t = out.report.constants.unwrap();
    assert!(t.k1 > 0.0 && t.k1.is_finite());
    assert_eq!(t.small, Some(true));
}

#[test]
fn self_similarity_needs_zero_damping() {
    let text = with(WORKED, "p = 4", "gamma = 1.0\np = 4");
    let cfg = ScenarioConfig::parse(&text).unwrap();
    let out = run_scenario(&cfg, Command::SelfSimilar, &RunOptions::default());
    assert_eq!(out.report.status, Status::Error);
    assert_eq!(out.report.status.exit_code(), 2);
    assert!(out.report.error.unwrap().contains("gamma"));
}

#[test]
fn report_round_trips_through_json() {
    let cfg = ScenarioConfig::parse(BASE).unwrap();
    let out = run_scenario(&cfg, Command::Solve, &RunOptions { seed: 9, ..Default::default() });
    let text = out.report.to_json().unwrap();
    let back = RunReport::from_json(&text).unwrap();
    assert_eq!(back, out.report);
    assert_eq!(back.format_version, FORMAT_VERSION);
    assert_eq!(back.seed, 9);
}

#[test]
fn tables_are_rectangular_csv() {
    let cfg = ScenarioConfig::parse(BASE).unwrap();
    let out = run_scenario(&cfg, Command::Solve, &RunOptions::default());
    assert!(!out.tables.is_empty());
    for t in &out.tables {
        let csv = t.to_csv().unwrap();
        let widths: Vec<usize> = csv.lines().map(|l| l.split(',').count()).collect();
        assert!(widths.iter().all(|w| *w == t.header.len()), "{}", t.name);
        assert_eq!(widths.len(), t.rows.len() + 1);
    }
    let bad = Table {
        name: "bad".into(),
        header: vec!["x".into()],
        rows: vec![vec![f64::NAN]],
    };
    assert!(bad.to_csv().is_err());
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", WORKED);
    let out = dir.path().join("run");
    let s = bin().args(["check", "--config"]).arg(&good).arg("--out").arg(&out).status().unwrap();
    assert_eq!(s.code(), Some(0));
    assert!(out.join("report.json").exists());

    let bad = write(dir.path(), "bad.toml", &with(WORKED, "count = 6", "count = = 6"));
    let o = bin().args(["solve", "--config"]).arg(&bad).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    let o = bin().arg("solve").output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let solve = bin().args(["solve", "--quad-nodes", "8", "--config"]).arg(&good).arg("--out").arg(&out).output().unwrap();
    assert_eq!(solve.status.code(), Some(0), "{}", String::from_utf8_lossy(&solve.stderr));
    let report = RunReport::from_json(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.command, Command::Solve);
}
