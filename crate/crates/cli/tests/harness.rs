use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use ldgmg::Coarsening;
use ldgmg_cli::run::HEADER;
use ldgmg_cli::{run_sweep, ExperimentConfig, SweepOptions, Table};

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/s1_small.csv")
}

fn small_s1() -> Vec<ExperimentConfig> {
    let base = ExperimentConfig {
        seeds: vec![1, 2, 3],
        ..Default::default()
    };
    Table::S1.configs(&base)
}

fn small_opts() -> SweepOptions {
    SweepOptions {
        max_n: Some(8),
        max_p: Some(2),
        ..Default::default()
    }
}

#[test]
fn sweep_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s1.csv");
    let s = run_sweep(&small_s1(), &small_opts(), &out).unwrap();
    assert_eq!(s.written, 2 * 2 * 2 * 3);
    assert_eq!(s.not_converged, 0);
    let got = fs::read_to_string(&out).unwrap();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(golden_path(), &got).unwrap();
    }
    let want = fs::read_to_string(golden_path()).unwrap();
    assert_eq!(got, want);
}

#[test]
fn sweep_resumes_without_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s1.csv");
    let configs = small_s1();
    let first: Vec<_> = configs.iter().filter(|c| c.mode == Coarsening::Flux).cloned().collect();
    run_sweep(&first, &small_opts(), &out).unwrap();
    let partial = fs::read_to_string(&out).unwrap();
    let s = run_sweep(&configs, &small_opts(), &out).unwrap();
    assert_eq!(s.resumed, 12);
    assert_eq!(s.written, 12);
    let full = fs::read_to_string(&out).unwrap();
    assert!(full.starts_with(&partial));
    assert_eq!(full.lines().filter(|l| l.starts_with("dim,")).count(), 1);
    assert_eq!(full.lines().count(), 1 + 24);
    let again = run_sweep(&configs, &small_opts(), &out).unwrap();
    assert_eq!((again.written, again.resumed), (0, 24));
}

#[test]
fn over_budget_entries_are_marked() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s4.csv");
    let opts = SweepOptions {
        max_n: Some(4),
        max_p: Some(1),
        memory_budget: 1,
    };
    let s = run_sweep(&Table::S4.configs(&ExperimentConfig::default()), &opts, &out).unwrap();
    assert_eq!(s.skipped, 2 * 3);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().skip(1).all(|l| l.contains(",,,skipped-memory,")));
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ldgmg"))
}

#[test]
fn solve_command_writes_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "dim = 2\nn = 8\np = 2\nmode = flux\nsolver = mgpcg\nseeds = 1,2\n").unwrap();
    let out = dir.path().join("out.csv");
    let hist = dir.path().join("hist.csv");
    let status = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .args(["--tauD", "50", "-o"])
        .arg(&out)
        .arg("--history")
        .arg(&hist)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), HEADER.join(","));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("2,uniform,8,2,flux,mgpcg,h,0.01,50,3,1,"));
    assert!(rows[0].ends_with(",converged,neumann"));
    assert!(fs::read_to_string(&hist).unwrap().starts_with("seed,iteration,error_norm,residual_norm\n1,0,"));
}

#[test]
fn non_convergence_gives_nonzero_exit() {
    let out = bin()
        .args(["solve", "--n", "16", "--p", "1", "--mode", "primal", "--max-iter", "2", "--seeds", "1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains(",max-iter,"));
}

#[test]
fn invalid_configuration_is_reported() {
    let out = bin().args(["solve", "--n", "12"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("power of two"));
}

#[test]
fn manufactured_command_reports_orders() {
    let out = bin()
        .args(["manufactured", "--p", "1", "--sizes", "8,16,32"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let orders: Vec<f64> = text
        .lines()
        .skip(2)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(orders.len(), 2);
    assert!(orders.iter().all(|o| *o > 1.9), "{text}");
}

#[test]
fn tau_study_command_runs() {
    let out = bin()
        .args(["tau-study", "--kind", "tauD", "--values", "100", "--sizes", "4,8", "--seeds", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.starts_with("2,uniform,") && l.contains(",2,flux,mgpcg,h,0.01,100,") && l.ends_with("dirichlet")));
}
