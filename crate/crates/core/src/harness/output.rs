//! Result files.
//!
//! A run directory holds:
//! - `grid.csv`: one record per report and grid point;
//! - `summary.csv`: one record per report (`replication = avg` for the
//!   replication-averaged report);
//! - `medians.csv`: median per-replication RMSEs per method and sample size;
//! - `failures.csv`: cells that errored;
//! - `series/*.csv`: averaged predicted-vs-oracle curves per method;
//! - `sweep.csv`: the smoothing sweep table, when present;
//! - `metadata.toml`: artifact version and the fully resolved config.
//!
//! Empty optional fields are written as empty strings. Floats use the
//! shortest representation that parses back to the same value.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{DmlError, Result};

use super::config::{ExperimentConfig, ExperimentKind, MethodName};
use super::evaluate::{EvalReport, GridRow, Summary};
use super::run::{RunOutput, SweepRow};

pub const ARTIFACT_VERSION: &str = concat!("dml-lab-v", env!("CARGO_PKG_VERSION"));

const KEY_COLUMNS: [&str; 5] = ["experiment", "method", "eps_multiplier", "m", "replication"];
const GRID_COLUMNS: [&str; 7] =
    ["spot", "pred_price", "pred_delta", "pred_gamma", "oracle_price", "oracle_delta", "oracle_gamma"];
const SUMMARY_COLUMNS: [&str; 4] = ["price_rmse", "delta_rmse", "gamma_rmse", "rmse_pct_of_price"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn key(r: &EvalReport) -> Vec<String> {
    vec![
        r.experiment.name().to_string(),
        r.method.name().to_string(),
        opt(r.eps_multiplier),
        r.m.to_string(),
        r.replication.map(|x| x.to_string()).unwrap_or_else(|| "avg".into()),
    ]
}

fn header(cols: &[&[&str]]) -> Vec<String> {
    cols.iter().flat_map(|c| c.iter().map(|s| s.to_string())).collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> DmlError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => DmlError::io(path, io),
        other => DmlError::parse(path, format!("{other:?}")),
    }
}

fn write_table(path: &Path, head: Vec<String>, rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(&head).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| DmlError::io(path, e))
}

fn grid_fields(g: &GridRow) -> Vec<String> {
    vec![
        g.spot.to_string(),
        g.pred_price.to_string(),
        g.pred_delta.to_string(),
        opt(g.pred_gamma),
        g.oracle_price.to_string(),
        g.oracle_delta.to_string(),
        opt(g.oracle_gamma),
    ]
}

fn summary_fields(s: &Summary) -> Vec<String> {
    vec![s.price_rmse.to_string(), s.delta_rmse.to_string(), opt(s.gamma_rmse), s.rmse_pct_of_price.to_string()]
}

pub fn write_grid(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let rows = reports.iter().flat_map(|r| r.rows.iter().map(move |g| [key(r), grid_fields(g)].concat()));
    write_table(path, header(&[&KEY_COLUMNS, &GRID_COLUMNS]), rows)
}

pub fn write_summary(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let rows = reports.iter().map(|r| [key(r), summary_fields(&r.summary)].concat());
    write_table(path, header(&[&KEY_COLUMNS, &SUMMARY_COLUMNS]), rows)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median of per-replication summaries for one method, ε and sample size.
#[derive(Clone, Debug, PartialEq)]
pub struct MedianRow {
    pub method: MethodName,
    pub eps_multiplier: Option<f64>,
    pub m: usize,
    pub replications: usize,
    pub price_rmse: f64,
    pub delta_rmse: f64,
    pub gamma_rmse: Option<f64>,
    pub rmse_pct_of_price: f64,
}

pub fn medians(run: &RunOutput) -> Vec<MedianRow> {
    run.averaged()
        .map(|a| {
            let reps: Vec<&Summary> =
                run.replicas(a.method, a.eps_multiplier, a.m).map(|r| &r.summary).collect();
            let col = |f: &dyn Fn(&Summary) -> f64| median(reps.iter().map(|s| f(s)).collect());
            let gammas: Option<Vec<f64>> = reps.iter().map(|s| s.gamma_rmse).collect();
            MedianRow {
                method: a.method,
                eps_multiplier: a.eps_multiplier,
                m: a.m,
                replications: reps.len(),
                price_rmse: col(&|s| s.price_rmse),
                delta_rmse: col(&|s| s.delta_rmse),
                gamma_rmse: gammas.map(median),
                rmse_pct_of_price: col(&|s| s.rmse_pct_of_price),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct Metadata<'a> {
    artifact_version: &'a str,
    reports: usize,
    failures: usize,
    config: &'a ExperimentConfig,
}

fn series_name(r: &EvalReport) -> String {
    let eps = r.eps_multiplier.map(|e| format!("_eps{e}")).unwrap_or_default();
    format!("{}_{}{eps}_m{}.csv", r.experiment.name(), r.method.name(), r.m)
}

/// Writes every result file for `run` into `dir`, creating it if needed.
pub fn emit_results(run: &RunOutput, sweep: Option<&[SweepRow]>, dir: &Path) -> Result<Vec<PathBuf>> {
    let series_dir = dir.join("series");
    fs::create_dir_all(&series_dir).map_err(|e| DmlError::io(&series_dir, e))?;
    let mut written = Vec::new();

    let path = dir.join("grid.csv");
    write_grid(&path, &run.reports)?;
    written.push(path);

    let path = dir.join("summary.csv");
    write_summary(&path, &run.reports)?;
    written.push(path);

    let path = dir.join("medians.csv");
    let rows = medians(run).into_iter().map(|m| {
        vec![
            m.method.name().to_string(),
            opt(m.eps_multiplier),
            m.m.to_string(),
            m.replications.to_string(),
            m.price_rmse.to_string(),
            m.delta_rmse.to_string(),
            opt(m.gamma_rmse),
            m.rmse_pct_of_price.to_string(),
        ]
    });
    let head = header(&[&["method", "eps_multiplier", "m", "replications"], &SUMMARY_COLUMNS]);
    write_table(&path, head, rows)?;
    written.push(path);

    let path = dir.join("failures.csv");
    let rows = run.failures.iter().map(|f| {
        vec![
            f.variant.method.name().to_string(),
            opt(f.variant.eps_multiplier),
            f.variant.m.to_string(),
            f.replication.to_string(),
            f.message.clone(),
        ]
    });
    write_table(&path, header(&[&["method", "eps_multiplier", "m", "replication", "message"]]), rows)?;
    written.push(path);

    for r in run.averaged() {
        let path = series_dir.join(series_name(r));
        write_table(&path, header(&[&GRID_COLUMNS]), r.rows.iter().map(grid_fields))?;
        written.push(path);
    }

    if let Some(table) = sweep {
        let path = dir.join("sweep.csv");
        let rows = table.iter().map(|s| {
            vec![
                s.method.name().to_string(),
                opt(s.eps_multiplier),
                s.price_rmse_pct.to_string(),
                s.replications.to_string(),
            ]
        });
        write_table(&path, header(&[&["method", "eps_multiplier", "price_rmse_pct", "replications"]]), rows)?;
        written.push(path);
    }

    let path = dir.join("metadata.toml");
    // The destination is not part of what produced the results.
    let config = ExperimentConfig { output: None, ..run.config.clone() };
    let meta = Metadata {
        artifact_version: ARTIFACT_VERSION,
        reports: run.reports.len(),
        failures: run.failures.len(),
        config: &config,
    };
    let text = toml::to_string(&meta).map_err(|e| DmlError::Config(e.to_string()))?;
    fs::write(&path, text).map_err(|e| DmlError::io(&path, e))?;
    written.push(path);
    Ok(written)
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(|e| csv_err(path, e))?;
    let head = r.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect();
    let rows = r.records().collect::<std::result::Result<Vec<_>, _>>().map_err(|e| csv_err(path, e))?;
    Ok((head, rows))
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.parse().map_err(|_| DmlError::parse(path, format!("bad number {s:?}")))
}

fn parse_opt(path: &Path, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(path, s).map(Some)
    }
}

type Key = (String, String, String, String, String);

fn parse_key(path: &Path, rec: &csv::StringRecord) -> Result<(Key, EvalReport)> {
    let f = |i: usize| rec.get(i).unwrap_or("");
    let k: Key = (f(0).into(), f(1).into(), f(2).into(), f(3).into(), f(4).into());
    let bad = |what: &str| DmlError::parse(path, format!("bad {what} in {rec:?}"));
    let experiment = ExperimentKind::parse(f(0)).map_err(|_| bad("experiment"))?;
    let method = MethodName::parse(f(1)).map_err(|_| bad("method"))?;
    let replication = match f(4) {
        "avg" => None,
        s => Some(s.parse().map_err(|_| bad("replication"))?),
    };
    let report = EvalReport {
        experiment,
        method,
        eps_multiplier: parse_opt(path, f(2))?,
        m: f(3).parse().map_err(|_| bad("m"))?,
        replication,
        rows: Vec::new(),
        summary: Summary { price_rmse: 0.0, delta_rmse: 0.0, gamma_rmse: None, rmse_pct_of_price: 0.0 },
    };
    Ok((k, report))
}

fn check_header(path: &Path, got: &[String], want: Vec<String>) -> Result<()> {
    if got != want.as_slice() {
        return Err(DmlError::parse(path, format!("unexpected columns {got:?}")));
    }
    Ok(())
}

/// Reads the reports written by [`emit_results`] back from `dir`.
pub fn read_results(dir: &Path) -> Result<Vec<EvalReport>> {
    let spath = dir.join("summary.csv");
    let (head, srows) = read_table(&spath)?;
    check_header(&spath, &head, header(&[&KEY_COLUMNS, &SUMMARY_COLUMNS]))?;
    let mut reports = Vec::with_capacity(srows.len());
    let mut index = BTreeMap::new();
    for rec in &srows {
        let (k, mut report) = parse_key(&spath, rec)?;
        let g = |i: usize| rec.get(5 + i).unwrap_or("");
        report.summary = Summary {
            price_rmse: parse_f64(&spath, g(0))?,
            delta_rmse: parse_f64(&spath, g(1))?,
            gamma_rmse: parse_opt(&spath, g(2))?,
            rmse_pct_of_price: parse_f64(&spath, g(3))?,
        };
        index.insert(k, reports.len());
        reports.push(report);
    }

    let gpath = dir.join("grid.csv");
    let (head, grows) = read_table(&gpath)?;
    check_header(&gpath, &head, header(&[&KEY_COLUMNS, &GRID_COLUMNS]))?;
    for rec in &grows {
        let (k, _) = parse_key(&gpath, rec)?;
        let i = *index.get(&k).ok_or_else(|| DmlError::parse(&gpath, format!("grid row without summary: {k:?}")))?;
        let g = |i: usize| rec.get(5 + i).unwrap_or("");
        reports[i].rows.push(GridRow {
            spot: parse_f64(&gpath, g(0))?,
            pred_price: parse_f64(&gpath, g(1))?,
            pred_delta: parse_f64(&gpath, g(2))?,
            pred_gamma: parse_opt(&gpath, g(3))?,
            oracle_price: parse_f64(&gpath, g(4))?,
            oracle_delta: parse_f64(&gpath, g(5))?,
            oracle_gamma: parse_opt(&gpath, g(6))?,
        });
    }
    Ok(reports)
}
