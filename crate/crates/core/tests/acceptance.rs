//! Acceptance run: every criterion at its stated tolerance, one PASS/FAIL
//! line each, non-zero exit if any fails.
//!
//! The smoothing sweep runs 5 replications by default; set
//! `DML_ACCEPTANCE_FULL=1` for the full 30. Result files land under
//! `$CARGO_TARGET_TMPDIR/acceptance/`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dml_lab::harness::problem::reference_model;
use dml_lab::harness::{
    emit_results, generate_dataset, medians, run_experiment, run_smoothing_sweep, ExperimentConfig, ExperimentKind,
    MedianRow, MethodName, RunOutput,
};
use dml_lab::market::{BachelierBasketParams, MarketModel, TwoStepGbmParams};
use dml_lab::montecarlo::estimate;
use dml_lab::oracles::{self, richardson_first, richardson_second};
use dml_lab::payoffs::{CallLeg, Contract, PayoffSpec};
use dml_lab::rng::StreamFactory;
use dml_lab::selftest::{gradient_suite, unbiasedness_suite, GRADIENT_NETWORKS, UNBIASEDNESS_SAMPLES};
use dml_lab::Result;

struct Outcome {
    id: u8,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn out_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed().as_secs_f64())
}

fn run_preset(kind: ExperimentKind) -> Result<RunOutput> {
    let cfg = ExperimentConfig::preset(kind);
    let run = run_experiment(&cfg)?;
    let dir = out_dir(kind.name());
    let _ = fs::remove_dir_all(&dir);
    emit_results(&run, None, &dir)?;
    Ok(run)
}

fn median_of(rows: &[MedianRow], method: MethodName, m: usize) -> &MedianRow {
    rows.iter().find(|r| r.method == method && r.m == m && r.eps_multiplier.is_none()).expect("method was run")
}

fn failures_note(run: &RunOutput) -> String {
    if run.failures.is_empty() {
        String::new()
    } else {
        format!("; {} failed cells", run.failures.len())
    }
}

fn unbiasedness() -> Result<Outcome> {
    let (checks, secs) = timed(|| unbiasedness_suite(UNBIASEDNESS_SAMPLES, 7));
    let checks = checks?;
    for c in &checks {
        println!("    {c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    Ok(Outcome {
        id: 1,
        name: "estimator unbiasedness",
        passed: failed == 0 && secs < 60.0,
        detail: format!("{}/{} within 3 SE at n = {UNBIASEDNESS_SAMPLES}, {secs:.1} s", checks.len() - failed, checks.len()),
    })
}

fn bias_exhibit() -> Result<Outcome> {
    let n = 100_000;
    let streams = StreamFactory::new(11, 0);
    let mut digital = ExperimentConfig::preset(ExperimentKind::Digital);
    digital.data.k = 1;
    let mut basket = ExperimentConfig::preset(ExperimentKind::BasketDigital);
    basket.data.k = 1;
    let zero = |cfg: &ExperimentConfig| -> Result<bool> {
        let data = generate_dataset(cfg, MethodName::Pathwise, None, n, &streams)?;
        Ok(data.iter().all(|s| s.delta.as_ref().is_some_and(|d| d.iter().all(|v| *v == 0.0))))
    };
    let (dig_zero, basket_zero) = (zero(&digital)?, zero(&basket)?);

    let interior = |cfg: &ExperimentConfig| {
        let pts = cfg.eval.points();
        pts[1..pts.len() - 1].to_vec()
    };
    let mut dig_max = 0.0f64;
    for x in interior(&digital) {
        dig_max = dig_max.max(oracles::bs_digital(x, 100.0, 0.0, digital.market.vol, digital.market.maturity)?.delta[0]);
    }
    // Along the evaluation diagonal the price moves with the sum of the
    // component deltas.
    let MarketModel::BachelierBasket(params) = reference_model(&basket)? else { unreachable!() };
    let mut basket_max = 0.0f64;
    for x in interior(&basket) {
        let o = oracles::bachelier_basket_digital(&params.with_spots(&vec![x; params.dim()]), basket.strike(), 0.0)?;
        basket_max = basket_max.max(o.delta.iter().sum());
    }
    Ok(Outcome {
        id: 2,
        name: "pathwise bias exhibit",
        passed: dig_zero && basket_zero && dig_max > 0.01 && basket_max > 0.01,
        detail: format!(
            "all-zero labels over {n} draws: digital {dig_zero}, basket {basket_zero}; max interior oracle delta: digital {dig_max:.4}, basket {basket_max:.4}"
        ),
    })
}

fn gradients() -> Result<Outcome> {
    let (checks, secs) = timed(|| gradient_suite(GRADIENT_NETWORKS, 3));
    let checks = checks?;
    for c in &checks {
        println!("    {c}");
    }
    Ok(Outcome {
        id: 3,
        name: "network gradients vs finite differences",
        passed: checks.iter().all(|c| c.passed) && secs < 30.0,
        detail: format!("{GRADIENT_NETWORKS} networks, {secs:.1} s"),
    })
}

fn digital(run: &RunOutput) -> Outcome {
    let rows = medians(run);
    let m = run.config.data.m;
    let (s, p, l) = (
        median_of(&rows, MethodName::Standard, m),
        median_of(&rows, MethodName::Pathwise, m),
        median_of(&rows, MethodName::Lrm, m),
    );
    let ordering = l.price_rmse < s.price_rmse && s.price_rmse < p.price_rmse;
    let (pl, sl, dpl) = (p.price_rmse / l.price_rmse, s.price_rmse / l.price_rmse, p.delta_rmse / l.delta_rmse);
    Outcome {
        id: 4,
        name: "digital experiment",
        passed: ordering && pl >= 5.0 && sl >= 2.0 && dpl >= 5.0 && run.failures.is_empty(),
        detail: format!(
            "median price RMSE std/pw/lrm {:.4}/{:.4}/{:.4}; ordering {ordering}; pathwise/LRM {pl:.2} (≥5), standard/LRM {sl:.2} (≥2), delta pathwise/LRM {dpl:.2} (≥5){}",
            s.price_rmse,
            p.price_rmse,
            l.price_rmse,
            failures_note(run)
        ),
    }
}

fn barrier(run: &RunOutput) -> Outcome {
    let avg: BTreeMap<&str, _> = run.averaged().map(|r| (r.method.name(), &r.summary)).collect();
    let (s, p, l) = (avg["standard"], avg["pathwise"], avg["lrm"]);
    let (pl, sl) = (p.price_rmse / l.price_rmse, s.price_rmse / l.price_rmse);
    let delta_best = l.delta_rmse < s.delta_rmse && l.delta_rmse < p.delta_rmse;
    Outcome {
        id: 5,
        name: "barrier experiment",
        passed: pl >= 5.0 && sl >= 2.0 && delta_best && run.failures.is_empty(),
        detail: format!(
            "averaged price RMSE std/pw/lrm {:.4}/{:.4}/{:.4}; pathwise/LRM {pl:.2} (≥5), standard/LRM {sl:.2} (≥2); delta RMSE {:.4}/{:.4}/{:.4}, LRM smallest {delta_best}{}",
            s.price_rmse,
            p.price_rmse,
            l.price_rmse,
            s.delta_rmse,
            p.delta_rmse,
            l.delta_rmse,
            failures_note(run)
        ),
    }
}

fn basket(run: &RunOutput) -> Outcome {
    let rows = medians(run);
    let m = run.config.data.m;
    let (p, l) = (median_of(&rows, MethodName::Pathwise, m), median_of(&rows, MethodName::Lrm, m));
    let (price, delta) = (p.price_rmse / l.price_rmse, p.delta_rmse / l.delta_rmse);
    Outcome {
        id: 6,
        name: "basket experiment",
        passed: price >= 3.0 && delta >= 3.0 && run.failures.is_empty(),
        detail: format!(
            "median pathwise/LRM price {price:.2} (≥3), delta {delta:.2} (≥3); LRM price {:.4}, delta {:.2e}{}",
            l.price_rmse,
            l.delta_rmse,
            failures_note(run)
        ),
    }
}

fn sweep(full: bool) -> Result<Outcome> {
    let mut cfg = ExperimentConfig::preset(ExperimentKind::SmoothingSweep);
    if !full {
        cfg.replications = 5;
    }
    let (result, secs) = timed(|| run_smoothing_sweep(&cfg));
    let (run, table) = result?;
    let dir = out_dir("smoothing_sweep");
    let _ = fs::remove_dir_all(&dir);
    emit_results(&run, Some(&table), &dir)?;

    let curve: Vec<(f64, f64)> = table
        .iter()
        .filter(|r| r.method == MethodName::PathwiseSmoothed)
        .map(|r| (r.eps_multiplier.unwrap_or(f64::NAN), r.price_rmse_pct))
        .collect();
    let reference = |m: MethodName| table.iter().find(|r| r.method == m).map(|r| r.price_rmse_pct).unwrap_or(f64::NAN);
    let (standard, lrm) = (reference(MethodName::Standard), reference(MethodName::Lrm));
    let argmin = (0..curve.len()).min_by(|&a, &b| curve[a].1.total_cmp(&curve[b].1)).unwrap_or(0);
    let interior_min = argmin > 0 && argmin + 1 < curve.len();
    let above_lrm = curve.iter().all(|(_, v)| *v > lrm);
    let ends_worse = curve.first().is_some_and(|c| c.1 > standard) && curve.last().is_some_and(|c| c.1 > standard);
    let points: Vec<String> = curve.iter().map(|(e, v)| format!("{e}:{v:.2}")).collect();
    Ok(Outcome {
        id: 7,
        name: "smoothing sweep",
        passed: interior_min && above_lrm && ends_worse && run.failures.is_empty(),
        detail: format!(
            "{} replications, {secs:.0} s; rmse% by eps [{}], standard {standard:.2}, LRM {lrm:.2}; interior minimum {interior_min}, all above LRM {above_lrm}, both ends above standard {ends_worse}{}",
            cfg.replications,
            points.join(", "),
            failures_note(&run)
        ),
    })
}

fn gamma(run: &RunOutput) -> Outcome {
    let rows = medians(run);
    let mut passed = run.failures.is_empty();
    let mut parts = Vec::new();
    for m in run.config.data.sizes() {
        let g = |method| median_of(&rows, method, m).gamma_rmse.unwrap_or(f64::NAN);
        let (s, p, l, h) = (g(MethodName::Standard), g(MethodName::Pathwise), g(MethodName::Lrm), g(MethodName::PwLr));
        let ok = h < p && h < l && p < s && l < s;
        passed &= ok;
        parts.push(format!("m={m}: pw_lr {h:.3} < (pathwise {p:.3}, lrm {l:.3}) < standard {s:.3} {ok}"));
    }
    Outcome { id: 8, name: "gamma experiment", passed, detail: parts.join("; ") + &failures_note(run) }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn oracle_consistency() -> Result<Outcome> {
    let (r, vol, t) = (0.02, 0.2, 1.0 / 3.0);
    let mut worst_delta = 0.0f64;
    let mut worst_gamma = 0.0f64;
    let mut track = |delta: f64, fd_delta: f64, gamma: Option<(f64, f64)>| {
        worst_delta = worst_delta.max(rel(delta, fd_delta));
        if let Some((g, fd)) = gamma {
            worst_gamma = worst_gamma.max(rel(g, fd));
        }
    };
    for x in [70.0, 90.0, 100.0, 110.0, 130.0] {
        let (hd, hg) = (1e-3 * x, 1e-2 * x);
        let call = oracles::bs_call(x, 100.0, r, vol, t)?;
        let price = |s: f64| oracles::bs_call(s, 100.0, r, vol, t).unwrap().price;
        track(call.delta[0], richardson_first(price, x, hd), Some((call.gamma.unwrap_or(f64::NAN), richardson_second(price, x, hg))));
        let dig = oracles::bs_digital(x, 100.0, r, vol, t)?;
        let price = |s: f64| oracles::bs_digital(s, 100.0, r, vol, t).unwrap().price;
        track(dig.delta[0], richardson_first(price, x, hd), Some((dig.gamma.unwrap_or(f64::NAN), richardson_second(price, x, hg))));
    }
    let legs =
        [CallLeg { weight: 1.0, strike: 0.85 }, CallLeg { weight: -1.5, strike: 0.9 }, CallLeg { weight: 0.75, strike: 1.15 }];
    for x in [0.7, 0.9, 1.0, 1.2, 1.5] {
        let o = oracles::portfolio_gamma(x, &legs, 0.0, vol, t)?;
        let price = |s: f64| oracles::portfolio_gamma(s, &legs, 0.0, vol, t).unwrap().price;
        track(o.delta[0], richardson_first(price, x, 1e-3 * x), Some((o.gamma.unwrap_or(f64::NAN), richardson_second(price, x, 1e-2 * x))));
    }
    let d = 20;
    let basket = BachelierBasketParams::new(vec![100.0; d], vec![20.0; d], vec![1.0 / d as f64; d], t)?;
    for shift in [-4.0, -1.0, 0.0, 2.0] {
        let spots: Vec<f64> = (0..d).map(|i| 100.0 + shift + 0.1 * i as f64).collect();
        let p = basket.with_spots(&spots);
        let o = oracles::bachelier_basket_digital(&p, 100.0, r)?;
        for i in [0, 7, 19] {
            let price = |s: f64| {
                let mut v = spots.clone();
                v[i] = s;
                oracles::bachelier_basket_digital(&basket.with_spots(&v), 100.0, r).unwrap().price
            };
            track(o.delta[i], richardson_first(price, spots[i], 1e-3 * spots[i]), None);
        }
    }
    let two = TwoStepGbmParams::new(100.0, 0.0, vol, 1.0 / 6.0, t)?;
    for x in [80.0, 90.0, 100.0, 120.0] {
        let p = two.with_spot(x);
        let o = oracles::barrier_price(&p, 85.0, 100.0)?;
        let price = |s: f64| oracles::barrier_price_only(&two.with_spot(s), 85.0, 100.0).unwrap();
        track(o.delta[0], richardson_first(price, x, 1e-3 * x), Some((o.gamma.unwrap_or(f64::NAN), richardson_second(price, x, 1e-2 * x))));
    }

    let spec = PayoffSpec::new(Contract::BarrierCall { strike: 100.0, barrier: 85.0 }, 0.0, t)?;
    let model = MarketModel::TwoStepGbm(two);
    let est = estimate(1_000_000, 13, 0, |rng| {
        let normals = [rng.normal(), rng.normal()];
        spec.discounted_payoff(&model.simulate(&normals).unwrap()).unwrap()
    });
    let quad = oracles::barrier_price(&two, 85.0, 100.0)?.price;
    let atm = oracles::bs_digital(100.0, 100.0, 0.0, 0.2, t)?.price;
    let passed = worst_delta < 1e-6 && worst_gamma < 1e-5 && est.within(quad, 3.0) && (atm - 0.47698).abs() < 5e-6;
    Ok(Outcome {
        id: 9,
        name: "oracle self-consistency",
        passed,
        detail: format!(
            "worst rel err delta {worst_delta:.1e} (<1e-6), gamma {worst_gamma:.1e} (<1e-5); barrier quadrature {quad:.5} vs MC {:.5} (z = {:+.2}); ATM digital {atm:.5}",
            est.mean,
            est.z_score(quad)
        ),
    })
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(entries) = fs::read_dir(&d) else { continue };
        for entry in entries.flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else if let Ok(bytes) = fs::read(&p) {
                out.insert(p.strip_prefix(dir).unwrap_or(&p).to_path_buf(), bytes);
            }
        }
    }
    out
}

/// Re-runs the digital preset and small versions of the other experiments
/// and compares result files byte for byte.
fn determinism() -> Result<Outcome> {
    if !out_dir("digital").join("metadata.toml").exists() {
        run_preset(ExperimentKind::Digital)?;
    }
    let first = files(&out_dir("digital"));
    let rerun = out_dir("digital_rerun");
    let _ = fs::remove_dir_all(&rerun);
    let cfg = ExperimentConfig::preset(ExperimentKind::Digital);
    emit_results(&run_experiment(&cfg)?, None, &rerun)?;
    let mut identical = !first.is_empty() && first == files(&rerun);
    let mut checked = vec![format!("digital preset ({} files)", first.len())];
    for kind in [ExperimentKind::Barrier, ExperimentKind::BasketDigital, ExperimentKind::GammaPortfolio, ExperimentKind::SmoothingSweep] {
        let mut cfg = ExperimentConfig::preset(kind);
        cfg.replications = 2;
        cfg.data.m = 128;
        cfg.data.sample_sizes = None;
        cfg.train.epochs = 5;
        let dirs = [out_dir(&format!("{}_small_a", kind.name())), out_dir(&format!("{}_small_b", kind.name()))];
        for dir in &dirs {
            let _ = fs::remove_dir_all(dir);
            if kind == ExperimentKind::SmoothingSweep {
                let (run, table) = run_smoothing_sweep(&cfg)?;
                emit_results(&run, Some(&table), dir)?;
            } else {
                emit_results(&run_experiment(&cfg)?, None, dir)?;
            }
        }
        identical &= files(&dirs[0]) == files(&dirs[1]);
        checked.push(format!("{} (reduced)", kind.name()));
    }
    Ok(Outcome {
        id: 10,
        name: "determinism",
        passed: identical,
        detail: format!("byte-identical reruns: {identical} for {}", checked.join(", ")),
    })
}

fn report(outcome: Result<Outcome>, id: u8, name: &'static str) -> Outcome {
    let o = outcome.unwrap_or_else(|e| Outcome { id, name, passed: false, detail: format!("error: {e}") });
    println!("[{}] {}. {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.id, o.name, o.detail);
    o
}

fn main() {
    // Numeric arguments select criteria; anything else (libtest flags passed
    // through by `cargo test`) is ignored, and `--list` runs nothing.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let selected: Vec<u8> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let wanted = |id: u8| selected.is_empty() || selected.contains(&id);
    let full = std::env::var("DML_ACCEPTANCE_FULL").is_ok_and(|v| v == "1");

    type Check = (u8, &'static str, Box<dyn Fn() -> Result<Outcome>>);
    let checks: Vec<Check> = vec![
        (1, "estimator unbiasedness", Box::new(unbiasedness)),
        (2, "pathwise bias exhibit", Box::new(bias_exhibit)),
        (3, "network gradients vs finite differences", Box::new(gradients)),
        (4, "digital experiment", Box::new(|| run_preset(ExperimentKind::Digital).map(|r| digital(&r)))),
        (5, "barrier experiment", Box::new(|| run_preset(ExperimentKind::Barrier).map(|r| barrier(&r)))),
        (6, "basket experiment", Box::new(|| run_preset(ExperimentKind::BasketDigital).map(|r| basket(&r)))),
        (7, "smoothing sweep", Box::new(move || sweep(full))),
        (8, "gamma experiment", Box::new(|| run_preset(ExperimentKind::GammaPortfolio).map(|r| gamma(&r)))),
        (9, "oracle self-consistency", Box::new(oracle_consistency)),
        (10, "determinism", Box::new(determinism)),
    ];
    let outcomes: Vec<Outcome> =
        checks.into_iter().filter(|c| wanted(c.0)).map(|(id, name, check)| report(check(), id, name)).collect();

    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.to_string()).collect();
    println!("acceptance: {} of {} criteria passed", outcomes.len() - failed.len(), outcomes.len());
    if !failed.is_empty() {
        println!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
