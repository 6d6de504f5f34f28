use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::process::Command;

use aa_admm::fixed_point::read_trace_csv;
use aa_admm::jacobian::read_eigenvalues_csv;
use aa_admm::problems::{ProblemInstance, ProblemKind};
use aa_admm_cli::report::report_rows;
use aa_admm_cli::{compare_report, run_experiment, ExperimentConfig, Stage, Summary};

fn small_ridge(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_kind(ProblemKind::Ridge, 4);
    cfg.problem.rows = Some(40);
    cfg.problem.cols = Some(60);
    cfg.problem.density = Some(0.05);
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv") || n.ends_with(".txt"))
        .collect();
    names.sort();
    names
}

#[test]
fn summary_files_exist_and_parse_back() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let summary = run_experiment(&small_ridge(dir)).unwrap();
    assert_eq!(Summary::load(&dir.join("summary.json")).unwrap(), summary);
    assert_eq!(ExperimentConfig::load(&dir.join(&summary.config_file)).unwrap(), small_ridge(dir));
    let inst = ProblemInstance::<f64>::load(dir.join(summary.instance_file.as_ref().unwrap())).unwrap();
    assert_eq!(inst.kind, ProblemKind::Ridge);
    let spectrum = summary.spectrum.as_ref().unwrap();
    let eigs = read_eigenvalues_csv::<f64, _>(BufReader::new(File::open(dir.join(&spectrum.file)).unwrap())).unwrap();
    assert_eq!(eigs.len(), summary.problem.dimension);
    assert_eq!(summary.schemes.len(), 7);
    for s in &summary.schemes {
        let trace = read_trace_csv::<f64, _>(BufReader::new(File::open(dir.join(&s.trace_file)).unwrap())).unwrap();
        assert_eq!(trace.last().unwrap().k, s.iterations);
        if let Some(f) = &s.spectrum_file {
            let psi = read_eigenvalues_csv::<f64, _>(BufReader::new(File::open(dir.join(f)).unwrap())).unwrap();
            assert_eq!(psi.len(), (s.m + 1) * eigs.len());
        }
    }
    assert!(dir.join(summary.plot_script.as_ref().unwrap()).exists());
    assert!(summary.error.is_none());
}

#[test]
fn predicted_saa1_factor_is_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = run_experiment(&small_ridge(tmp.path())).unwrap();
    let rho_q = summary.spectrum.as_ref().unwrap().rho_q;
    let saa = summary.scheme("saa1:theory").unwrap();
    assert!((saa.predicted_factor.unwrap() - (1.0 - (1.0 - rho_q).sqrt())).abs() < 1e-12);
    let measured = saa.measured_factor.unwrap();
    assert!((measured - saa.predicted_factor.unwrap()).abs() < 0.05, "{measured}");
    let m3 = summary.sweeps.iter().find(|s| s.m == 3).unwrap();
    assert!(m3.refined.is_some());
    assert!(m3.factor <= m3.refined.as_ref().unwrap().coarse_factor);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&small_ridge(a.path())).unwrap();
    let mut cfg = small_ridge(b.path());
    cfg.problem.kind = Some(ProblemKind::Ridge);
    run_experiment(&cfg).unwrap();
    let names = csv_files(a.path());
    assert_eq!(names, csv_files(b.path()));
    assert!(names.len() >= 10);
    for n in names {
        assert_eq!(std::fs::read(a.path().join(&n)).unwrap(), std::fs::read(b.path().join(&n)).unwrap(), "{n}");
    }
}

#[test]
fn report_has_one_row_per_scheme() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let s1 = run_experiment(&small_ridge(a.path())).unwrap();
    let s2 = run_experiment(&small_ridge(b.path())).unwrap();
    let rows = report_rows(std::slice::from_ref(&s1));
    assert!(rows.len() >= 4);
    let labels: Vec<&str> = rows.iter().map(|r| r.scheme.as_str()).collect();
    assert_eq!(labels, ["plain", "AA(1)", "AA(2)", "AA(3)", "sAA(1)", "sAA(2)", "sAA(3)"]);
    let again = report_rows(&[s2]);
    let predicted = |rs: &[aa_admm_cli::report::ReportRow]| rs.iter().map(|r| r.predicted_factor).collect::<Vec<_>>();
    assert_eq!(predicted(&rows), predicted(&again));
    let table = compare_report(&[s1]).unwrap();
    assert!(table.starts_with("problem,seed,scheme,rho_q,beta,predicted_factor,measured_factor,iterations_to_tol\n"));
    assert_eq!(table.lines().count(), 8);
    assert_eq!(compare_report(&[]).unwrap_err().stage, Stage::Report);
}

#[test]
fn stage_failure_leaves_partial_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_ridge(tmp.path());
    cfg.problem.instance = Some(tmp.path().join("missing.txt"));
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Generate);
    let partial = Summary::load(&tmp.path().join("summary.json")).unwrap();
    assert_eq!(partial.error.unwrap().stage, Stage::Generate);
    assert!(partial.spectrum.is_none() && partial.schemes.is_empty());
    assert!(tmp.path().join("config.toml").exists());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aa-admm"))
}

#[test]
fn cli_subcommands_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n);

    let no_seed = cli().args(["generate", "--kind", "ridge", "--out"]).arg(p("x.txt")).output().unwrap();
    assert!(!no_seed.status.success());

    let gen = cli()
        .args(["generate", "--kind", "lasso", "--seed", "2", "--rows", "30", "--cols", "40", "--density", "0.2", "--out"])
        .arg(p("lasso.txt"))
        .output()
        .unwrap();
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));

    let spec = cli().args(["spectrum", "--instance"]).arg(p("lasso.txt")).arg("--out").arg(p("eigs.csv")).output().unwrap();
    assert!(spec.status.success(), "{}", String::from_utf8_lossy(&spec.stderr));
    let spec_json: serde_json::Value = serde_json::from_slice(&spec.stdout).unwrap();
    assert!(spec_json["rho_q"].as_f64().unwrap() < 1.0);

    let beta = cli().args(["optimal-beta", "--eigenvalues"]).arg(p("eigs.csv")).output().unwrap();
    assert!(beta.status.success(), "{}", String::from_utf8_lossy(&beta.stderr));
    let beta_json: serde_json::Value = serde_json::from_slice(&beta.stdout).unwrap();
    let b = beta_json["beta"][0].as_f64().unwrap();

    let closed = cli().args(["optimal-beta", "--sigma-min", "0", "--sigma-max", "0.8333"]).output().unwrap();
    let closed: serde_json::Value = serde_json::from_slice(&closed.stdout).unwrap();
    assert!((closed["beta"][0].as_f64().unwrap() - 0.4202).abs() < 1e-4);

    let sweep = cli().args(["sweep", "--m", "2", "--eigenvalues"]).arg(p("eigs.csv")).output().unwrap();
    assert!(sweep.status.success(), "{}", String::from_utf8_lossy(&sweep.stderr));

    let scheme = format!("saa1:{b}");
    let solve = cli()
        .args(["solve", "--scheme", &scheme, "--instance"])
        .arg(p("lasso.txt"))
        .arg("--out")
        .arg(p("trace.csv"))
        .output()
        .unwrap();
    assert!(solve.status.success(), "{}", String::from_utf8_lossy(&solve.stderr));
    assert!(p("trace.csv").exists());

    let exp = cli()
        .args(["experiment", "--kind", "ridge", "--seed", "3", "--rows", "30", "--cols", "40", "--density", "0.1", "--schemes", "plain,aa1,saa1:theory", "--output-dir"])
        .arg(p("exp"))
        .output()
        .unwrap();
    assert!(exp.status.success(), "{}", String::from_utf8_lossy(&exp.stderr));
    let report = cli().arg("report").arg(p("exp/summary.json")).output().unwrap();
    assert!(report.status.success());
    assert_eq!(String::from_utf8_lossy(&report.stdout).lines().count(), 4);

    let missing = cli().args(["solve", "--instance"]).arg(p("nope.txt")).arg("--out").arg(p("t.csv")).output().unwrap();
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("generate stage failed"));

    let bad_cfg = p("bad.toml");
    std::fs::write(&bad_cfg, "seed = 1\nfd_stepp = 1e-3\n[problem]\nkind = \"ridge\"\n").unwrap();
    let bad = cli().args(["experiment", "--config"]).arg(&bad_cfg).output().unwrap();
    assert!(!bad.status.success());
    let stderr = String::from_utf8_lossy(&bad.stderr);
    assert!(stderr.contains("config stage failed") && stderr.contains("unknown field"), "{stderr}");
}
