//! Replicated training runs and the smoothing sweep.

use rayon::prelude::*;

use crate::error::Result;
use crate::network::train;
use crate::rng::StreamFactory;

use super::config::{ExperimentConfig, ExperimentKind, MethodName};
use super::evaluate::{average_rows, evaluate_on_grid, summarize, EvalReport};
use super::problem::{generate_dataset, GridOracle};

/// One configuration compared across replications.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Variant {
    pub method: MethodName,
    pub eps_multiplier: Option<f64>,
    pub m: usize,
}

/// A `(variant, replication)` cell that errored; the rest of the run proceeds.
#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub variant: Variant,
    pub replication: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    /// Per-replication reports followed by the averaged report, per variant.
    pub reports: Vec<EvalReport>,
    pub failures: Vec<CellFailure>,
}

impl RunOutput {
    pub fn averaged(&self) -> impl Iterator<Item = &EvalReport> {
        self.reports.iter().filter(|r| r.replication.is_none())
    }

    pub fn replicas(&self, method: MethodName, eps: Option<f64>, m: usize) -> impl Iterator<Item = &EvalReport> {
        self.reports
            .iter()
            .filter(move |r| r.replication.is_some() && r.method == method && r.eps_multiplier == eps && r.m == m)
    }
}

pub fn variants(cfg: &ExperimentConfig) -> Vec<Variant> {
    let mut out = Vec::new();
    for m in cfg.data.sizes() {
        for &method in &cfg.methods {
            if method == MethodName::PathwiseSmoothed {
                for e in cfg.eps_multipliers() {
                    out.push(Variant { method, eps_multiplier: Some(e), m });
                }
            } else {
                out.push(Variant { method, eps_multiplier: None, m });
            }
        }
    }
    out
}

/// Training seed for a replication; shared by every method so runs differ
/// only in their labels.
pub fn train_seed(seed: u64, replication: usize) -> u64 {
    let mut z = seed ^ (replication as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn run_cell(cfg: &ExperimentConfig, oracle: &GridOracle, v: Variant, replication: usize) -> Result<EvalReport> {
    let streams = StreamFactory::new(cfg.seed, replication as u64);
    let data = generate_dataset(cfg, v.method, v.eps_multiplier, v.m, &streams)?;
    let model = train(&data, &cfg.network_config(), &cfg.train_config(v.method, train_seed(cfg.seed, replication)))?;
    let (rows, summary) = evaluate_on_grid(&model, oracle)?;
    Ok(EvalReport {
        experiment: cfg.experiment,
        method: v.method,
        eps_multiplier: v.eps_multiplier,
        m: v.m,
        replication: Some(replication),
        rows,
        summary,
    })
}

/// Trains and evaluates every method for every replication (and sample size).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let oracle = GridOracle::build(cfg)?;
    let variants = variants(cfg);
    let cells: Vec<(Variant, usize)> =
        variants.iter().flat_map(|&v| (0..cfg.replications).map(move |r| (v, r))).collect();
    let results: Vec<Result<EvalReport>> =
        cells.par_iter().map(|&(v, r)| run_cell(cfg, &oracle, v, r)).collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let mut results = results.into_iter();
    for &v in &variants {
        let mut done = Vec::new();
        for replication in 0..cfg.replications {
            match results.next().expect("one result per cell") {
                Ok(rep) => done.push(rep),
                Err(e) => failures.push(CellFailure { variant: v, replication, message: e.to_string() }),
            }
        }
        if !done.is_empty() {
            let slices: Vec<_> = done.iter().map(|r| r.rows.as_slice()).collect();
            let rows = average_rows(&slices);
            let summary = summarize(&rows);
            let averaged = EvalReport { replication: None, rows, summary, ..done[0].clone() };
            reports.extend(done);
            reports.push(averaged);
        }
    }
    Ok(RunOutput { config: cfg.clone(), reports, failures })
}

/// One row of the smoothing sweep table.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub method: MethodName,
    pub eps_multiplier: Option<f64>,
    /// Mean over successful replications of the per-replication price RMSE
    /// as a percentage of price.
    pub price_rmse_pct: f64,
    pub replications: usize,
}

pub fn sweep_table(run: &RunOutput) -> Vec<SweepRow> {
    let m = run.config.data.m;
    let row = |method: MethodName, eps: Option<f64>| {
        let vals: Vec<f64> = run.replicas(method, eps, m).map(|r| r.summary.rmse_pct_of_price).collect();
        SweepRow {
            method,
            eps_multiplier: eps,
            price_rmse_pct: vals.iter().sum::<f64>() / vals.len() as f64,
            replications: vals.len(),
        }
    };
    let mut rows: Vec<SweepRow> =
        run.config.eps_multipliers().into_iter().map(|e| row(MethodName::PathwiseSmoothed, Some(e))).collect();
    rows.push(row(MethodName::Standard, None));
    rows.push(row(MethodName::Lrm, None));
    rows
}

/// Runs smoothed-pathwise training at every configured ε plus the standard
/// and LRM references.
pub fn run_smoothing_sweep(cfg: &ExperimentConfig) -> Result<(RunOutput, Vec<SweepRow>)> {
    let mut cfg = cfg.clone();
    cfg.experiment = ExperimentKind::SmoothingSweep;
    cfg.methods = vec![MethodName::PathwiseSmoothed, MethodName::Standard, MethodName::Lrm];
    cfg.data.sample_sizes = None;
    let run = run_experiment(&cfg)?;
    let table = sweep_table(&run);
    Ok((run, table))
}
