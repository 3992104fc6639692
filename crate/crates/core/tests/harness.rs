//! End-to-end runs of the experiment harness and the command line.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use dml_lab::harness::{
    emit_results, read_results, run_experiment, run_smoothing_sweep, ExperimentConfig, ExperimentKind, MethodName,
};

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(kind);
    cfg.replications = 2;
    cfg.data.m = 64;
    cfg.data.k = 2;
    cfg.data.sample_sizes = None;
    cfg.train.epochs = 3;
    cfg.train.batch_size = 32;
    cfg.eval.n_points = 9;
    cfg
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn identical_runs_write_identical_files() {
    for kind in [ExperimentKind::Digital, ExperimentKind::Barrier, ExperimentKind::BasketDigital] {
        let cfg = small(kind);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        emit_results(&run_experiment(&cfg).unwrap(), None, a.path()).unwrap();
        emit_results(&run_experiment(&cfg).unwrap(), None, b.path()).unwrap();
        let (fa, fb) = (files(a.path()), files(b.path()));
        assert!(fa.len() > 5, "{kind:?}: {:?}", fa.keys());
        assert_eq!(fa, fb, "{kind:?}");
    }
}

#[test]
fn different_seed_changes_results() {
    let cfg = small(ExperimentKind::Digital);
    let other = ExperimentConfig { seed: cfg.seed + 1, ..cfg.clone() };
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&other).unwrap();
    assert_ne!(a.reports[0].rows, b.reports[0].rows);
}

#[test]
fn digital_run_emits_series_for_each_method() {
    let cfg = small(ExperimentKind::Digital);
    let dir = tempfile::tempdir().unwrap();
    emit_results(&run_experiment(&cfg).unwrap(), None, dir.path()).unwrap();
    for method in ["standard", "pathwise", "lrm"] {
        let path = dir.path().join(format!("series/digital_{method}_m64.csv"));
        let text = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(text.lines().count(), 1 + cfg.eval.n_points);
    }
    let back = read_results(dir.path()).unwrap();
    assert_eq!(back.len(), 3 * (cfg.replications + 1));
}

#[test]
fn gamma_experiment_reports_gamma_for_every_size() {
    let mut cfg = small(ExperimentKind::GammaPortfolio);
    cfg.data.sample_sizes = Some(vec![32, 64]);
    let run = run_experiment(&cfg).unwrap();
    assert!(run.failures.is_empty(), "{:?}", run.failures);
    let averaged: Vec<_> = run.averaged().collect();
    assert_eq!(averaged.len(), 2 * cfg.methods.len());
    assert!(averaged.iter().all(|r| r.summary.gamma_rmse.is_some()));
    assert!(cfg.methods.contains(&MethodName::PwLr));
}

#[test]
fn sweep_writes_reference_rows() {
    let mut cfg = small(ExperimentKind::SmoothingSweep);
    cfg.sweep.as_mut().unwrap().eps_multipliers = vec![0.5, 2.0];
    let (run, table) = run_smoothing_sweep(&cfg).unwrap();
    assert_eq!(table.len(), 4);
    let dir = tempfile::tempdir().unwrap();
    emit_results(&run, Some(&table), dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn command_line_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    fs::write(
        &config,
        "experiment = \"digital\"\nreplications = 1\n[data]\nm = 32\nk = 1\n[train]\nepochs = 2\n[eval]\nn_points = 5\n",
    )
    .unwrap();
    let run = |out: &Path| {
        Command::new(env!("CARGO_BIN_EXE_dml-lab"))
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .args(["--method", "standard,lrm"])
            .output()
            .unwrap()
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = run(&a);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(String::from_utf8_lossy(&first.stdout).contains("lrm"));
    assert!(run(&b).status.success());
    assert_eq!(files(&a), files(&b));

    let bad = Command::new(env!("CARGO_BIN_EXE_dml-lab")).args(["run", "--config", "no_such_thing"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
