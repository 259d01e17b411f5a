use std::path::PathBuf;
use std::process::Command;

use isabc_core::benchmarks::{verify_solution, VERIFY_TOL};
use isabc_core::harness::experiment::{draw_channels, RESULTS_HEADER};
use isabc_core::harness::{run_experiment, ExperimentConfig, Sweep};
use isabc_core::{Scheme, SchemeConfig};

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("isabc-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn small(out: PathBuf) -> ExperimentConfig {
    ExperimentConfig {
        m: 4,
        n: 4,
        k: 2,
        trials: 4,
        randomization_trials: 50,
        schemes: vec![Scheme::IsabcActive, Scheme::BackCom, Scheme::CommOnly],
        sweep: Sweep::Tags,
        sweep_values: vec![1.0, 2.0],
        out_dir: out,
        ..Default::default()
    }
}

/// Drops the three timing columns.
fn untimed(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplitn(4, ',').last().unwrap_or("").to_string()).collect()
}

#[test]
fn results_are_deterministic() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    run_experiment(&small(a.clone())).unwrap();
    run_experiment(&small(b.clone())).unwrap();
    let ra = std::fs::read_to_string(a.join("results.csv")).unwrap();
    let rb = std::fs::read_to_string(b.join("results.csv")).unwrap();
    assert_eq!(ra.lines().next().unwrap(), RESULTS_HEADER);
    assert_eq!(ra.lines().count(), 1 + 2 * 3 * 4);
    assert_eq!(untimed(&ra), untimed(&rb));
}

#[test]
fn feasible_rows_pass_reverification() {
    let cfg = small(scratch("verify"));
    let out = run_experiment(&cfg).unwrap();
    let mut checked = 0;
    for r in out.records.iter().filter(|r| r.feasible) {
        let cell = cfg.cell(r.sweep_value);
        let sc = SchemeConfig::new(r.scheme);
        let mut params = cell.params();
        let mut ch = draw_channels(&cell, r.seed).unwrap();
        if sc.drops_tags() {
            ch = ch.without_tags();
            params.thresholds.gamma_t.clear();
            params.thresholds.upsilon.clear();
        }
        assert!(verify_solution(&ch, r.solution.as_ref().unwrap(), &sc, &params, VERIFY_TOL), "trial {} {}", r.trial, r.scheme);
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn summary_uses_linear_averaging() {
    let out = run_experiment(&small(scratch("summary"))).unwrap();
    for c in isabc_core::harness::summarize(&out.records) {
        if c.feasible > 0 {
            assert!((c.mean_power_dbm - (10.0 * c.mean_power_w.log10() + 30.0)).abs() < 1e-9);
            assert!(c.mean_power_dbm >= c.mean_of_dbm - 1e-9);
        }
    }
}

fn isabc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_isabc")).args(args).env("ISABC_THREADS", "1").output().unwrap()
}

#[test]
fn cli_sweep_writes_files() {
    let d = scratch("cli-sweep");
    let out = isabc(&[
        "sweep", "--sweep", "tags", "--values", "1,2", "--scheme", "isabc-a,com-only", "--num-trials", "2", "--set", "m=4", "--set", "n=4",
        "--out-dir", d.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["results.csv", "summary.csv", "summary.txt", "config.txt"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let cfg = ExperimentConfig::parse(&std::fs::read_to_string(d.join("config.txt")).unwrap()).unwrap();
    assert_eq!((cfg.m, cfg.trials, cfg.sweep), (4, 2, Sweep::Tags));
}

#[test]
fn cli_run_reads_config_and_overrides() {
    let d = scratch("cli-run");
    std::fs::create_dir_all(&d).unwrap();
    let conf = d.join("exp.conf");
    std::fs::write(&conf, format!("m = 4\nn = 4\nk = 1\ntrials = 2\nscheme = backcom\nout_dir = {}\n", d.join("out").display())).unwrap();
    let out = isabc(&["run", conf.to_str().unwrap(), "--set", "base_seed=7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rendered = std::fs::read_to_string(d.join("out/config.txt")).unwrap();
    assert!(rendered.contains("base_seed = 7"));
}

#[test]
fn cli_convergence_and_beampattern_outputs() {
    let d = scratch("cli-extra");
    let ds = d.to_str().unwrap();
    let out = isabc(&["sweep", "--sweep", "convergence", "--values", "", "--num-trials", "2", "--set", "m=4", "--set", "n=4", "--set", "k=1", "--out-dir", ds]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_to_string(d.join("convergence.csv")).unwrap().starts_with("sweep_value,scheme,iteration"));

    let out = isabc(&["beampattern", "--trials", "0", "--scheme", "isabc-a", "--set", "m=4", "--set", "n=4", "--set", "k=1", "--out-dir", ds]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let tx = std::fs::read_to_string(d.join("beampattern/isabc-a_trial0_tx.csv")).unwrap();
    assert!(tx.starts_with("theta_deg,gain_db\n-90.0000,"));
    assert_eq!(tx.lines().count(), 1 + 361);

    let out = isabc(&["runtime", "--values", "1,2", "--scheme", "isabc-a", "--num-trials", "1", "--set", "m=4", "--set", "n=4", "--out-dir", ds]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rt = std::fs::read_to_string(d.join("runtime.csv")).unwrap();
    assert_eq!(rt.lines().count(), 3);
}

#[test]
fn cli_exit_codes() {
    assert_eq!(isabc(&["--help"]).status.code(), Some(0));
    assert_eq!(isabc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(isabc(&["sweep", "--sweep", "tags", "--values", "1", "--set", "bogus=1"]).status.code(), Some(1));
    assert_eq!(isabc(&["sweep", "--sweep", "tags", "--values", "0.5"]).status.code(), Some(1));
    assert_eq!(isabc(&["run", "/nonexistent/isabc.conf"]).status.code(), Some(1));
    // nine tags crowd eight receive antennas past feasibility
    let d = scratch("cli-infeasible");
    let out = isabc(&["sweep", "--sweep", "tags", "--values", "9", "--scheme", "isabc-a", "--num-trials", "2", "--out-dir", d.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
