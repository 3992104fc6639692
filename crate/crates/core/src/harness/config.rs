//! Experiment configuration.
//!
//! A user file names an `experiment`; its keys are merged over the built-in
//! preset for that experiment and the result is parsed strictly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{DmlError, Result};
use crate::labels::{DeltaKind, GammaKind, LabelMethod};
use crate::network::{DeltaWeighting, LossWeights, NetworkConfig, TrainConfig};
use crate::payoffs::CallLeg;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Digital,
    BasketDigital,
    SmoothingSweep,
    Barrier,
    GammaPortfolio,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] =
        [Self::Digital, Self::BasketDigital, Self::SmoothingSweep, Self::Barrier, Self::GammaPortfolio];

    pub fn name(self) -> &'static str {
        match self {
            Self::Digital => "digital",
            Self::BasketDigital => "basket_digital",
            Self::SmoothingSweep => "smoothing_sweep",
            Self::Barrier => "barrier",
            Self::GammaPortfolio => "gamma_portfolio",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| DmlError::Config(format!("unknown experiment {name:?}")))
    }

    pub fn preset(self) -> &'static str {
        match self {
            Self::Digital => include_str!("../../configs/digital.toml"),
            Self::BasketDigital => include_str!("../../configs/basket_digital.toml"),
            Self::SmoothingSweep => include_str!("../../configs/smoothing_sweep.toml"),
            Self::Barrier => include_str!("../../configs/barrier.toml"),
            Self::GammaPortfolio => include_str!("../../configs/gamma_portfolio.toml"),
        }
    }
}

/// Training-label recipe compared in an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Standard,
    Pathwise,
    Lrm,
    PathwiseSmoothed,
    PwLr,
    LrmGamma,
}

impl MethodName {
    pub const ALL: [MethodName; 6] =
        [Self::Standard, Self::Pathwise, Self::Lrm, Self::PathwiseSmoothed, Self::PwLr, Self::LrmGamma];

    pub fn name(self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::Pathwise => "pathwise",
            Self::Lrm => "lrm",
            Self::PathwiseSmoothed => "pathwise_smoothed",
            Self::PwLr => "pw_lr",
            Self::LrmGamma => "lrm_gamma",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| DmlError::Config(format!("unknown method {name:?}")))
    }

    pub fn label_method(self, eps_multiplier: Option<f64>) -> LabelMethod {
        match self {
            Self::Standard => LabelMethod::STANDARD,
            Self::Pathwise => LabelMethod::new(DeltaKind::Pathwise, GammaKind::None),
            Self::Lrm => LabelMethod::new(DeltaKind::Lrm, GammaKind::None),
            Self::PathwiseSmoothed => LabelMethod {
                smoothing_eps_multiplier: eps_multiplier,
                ..LabelMethod::new(DeltaKind::PathwiseSmoothed, GammaKind::None)
            },
            Self::PwLr => LabelMethod::new(DeltaKind::Pathwise, GammaKind::PwLr),
            Self::LrmGamma => LabelMethod::new(DeltaKind::Lrm, GammaKind::Lrm),
        }
    }

    pub fn loss_weights(self) -> LossWeights {
        match self {
            Self::Standard => LossWeights::VALUE_ONLY,
            Self::Pathwise | Self::Lrm | Self::PathwiseSmoothed => LossWeights { value: 0.5, delta: 0.5, gamma: 0.0 },
            Self::PwLr | Self::LrmGamma => LossWeights { value: 0.4, delta: 0.4, gamma: 0.2 },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierMode {
    /// The barrier is a fixed level set relative to the reference spot.
    Reference,
    /// The barrier moves with each training spot at `barrier/spot` of it.
    PerPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    /// Reference spot; for the basket, every asset's reference spot.
    pub spot: f64,
    pub rate: f64,
    /// Lognormal volatility, or the absolute per-asset volatility for the basket.
    pub vol: f64,
    pub maturity: f64,
    /// Barrier monitoring date.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitor_time: Option<f64>,
    /// Basket size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier_mode: Option<BarrierMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legs: Option<Vec<CallLeg>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub m: usize,
    pub k: usize,
    /// Training spots are uniform on `[train_lo, train_hi]`, per asset.
    pub train_lo: f64,
    pub train_hi: f64,
    /// Training-set sizes to run in place of `m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_sizes: Option<Vec<usize>>,
}

impl DataConfig {
    pub fn sizes(&self) -> Vec<usize> {
        self.sample_sizes.clone().unwrap_or_else(|| vec![self.m])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkShape {
    pub hidden_layers: usize,
    pub hidden_units: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    #[serde(default)]
    pub delta_weighting: DeltaWeighting,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub lr_min: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalGrid {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
}

impl EvalGrid {
    /// Uniform points with both endpoints exact.
    pub fn points(&self) -> Vec<f64> {
        let n = self.n_points;
        let step = (self.hi - self.lo) / (n - 1) as f64;
        (0..n).map(|i| if i + 1 == n { self.hi } else { self.lo + step * i as f64 }).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Ramp widths in units of `σ√T · spot`.
    pub eps_multipliers: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub replications: usize,
    pub methods: Vec<MethodName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub market: MarketConfig,
    pub payoff: PayoffConfig,
    pub data: DataConfig,
    pub network: NetworkShape,
    pub train: TrainSettings,
    pub eval: EvalGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

/// Recursively overlays `overlay` onto `base`; tables merge, everything else
/// replaces.
pub fn merge_tables(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn parse_table(text: &str, origin: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| DmlError::Config(format!("{origin}: {e}")))
}

impl ExperimentConfig {
    pub fn preset(kind: ExperimentKind) -> Self {
        Self::from_toml_str(&format!("experiment = \"{}\"", kind.name())).expect("built-in presets are valid")
    }

    /// Parses user TOML over the preset named by its `experiment` key.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user = parse_table(text, "config")?;
        let name = user
            .get("experiment")
            .and_then(|v| v.as_str())
            .ok_or_else(|| DmlError::Config("config must name an `experiment`".into()))?;
        let kind = ExperimentKind::parse(name)?;
        let mut table = parse_table(kind.preset(), name)?;
        merge_tables(&mut table, user);
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| DmlError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DmlError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| DmlError::parse(path, e))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| DmlError::Config(e.to_string()))
    }

    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            input_dim: self.input_dim(),
            hidden_layers: self.network.hidden_layers,
            hidden_units: self.network.hidden_units,
        }
    }

    pub fn train_config(&self, method: MethodName, seed: u64) -> TrainConfig {
        TrainConfig {
            loss_weights: method.loss_weights(),
            delta_weighting: self.train.delta_weighting,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            lr_max: self.train.lr_max,
            lr_min: self.train.lr_min,
            seed,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self.experiment {
            ExperimentKind::BasketDigital => self.market.dim.unwrap_or(1),
            _ => 1,
        }
    }

    pub fn strike(&self) -> f64 {
        self.payoff.strike.unwrap_or(f64::NAN)
    }

    pub fn eps_multipliers(&self) -> Vec<f64> {
        self.sweep.as_ref().map(|s| s.eps_multipliers.clone()).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DmlError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        let m = &self.market;
        if !(m.spot > 0.0 && m.vol > 0.0 && m.maturity > 0.0 && m.rate.is_finite()) {
            return bad(format!("market needs positive spot, vol and maturity, got {m:?}"));
        }
        if self.data.k == 0 || self.data.sizes().contains(&0) {
            return bad("m, sample_sizes and k must be positive".into());
        }
        if !(self.data.train_lo < self.data.train_hi) || !self.data.train_lo.is_finite() {
            return bad("training range needs train_lo < train_hi".into());
        }
        if self.eval.n_points < 2 || !(self.eval.lo < self.eval.hi) {
            return bad("eval grid needs lo < hi and n_points >= 2".into());
        }
        self.network_config().validate()?;
        self.train_config(MethodName::Standard, 0).validate()?;

        let needs_strike = self.experiment != ExperimentKind::GammaPortfolio;
        if needs_strike && !self.payoff.strike.is_some_and(|k| k > 0.0) {
            return bad("payoff.strike must be positive".into());
        }
        match self.experiment {
            ExperimentKind::Barrier => {
                let t1 = m.monitor_time.unwrap_or(f64::NAN);
                if !(t1 > 0.0 && t1 < m.maturity) {
                    return bad("barrier needs 0 < market.monitor_time < market.maturity".into());
                }
                if !self.payoff.barrier.is_some_and(|b| b > 0.0) {
                    return bad("barrier needs a positive payoff.barrier".into());
                }
            }
            ExperimentKind::BasketDigital => {
                if !m.dim.is_some_and(|d| d >= 1) {
                    return bad("basket needs market.dim >= 1".into());
                }
            }
            ExperimentKind::GammaPortfolio => {
                if self.payoff.legs.as_ref().is_none_or(|l| l.is_empty()) {
                    return bad("gamma_portfolio needs payoff.legs".into());
                }
            }
            ExperimentKind::SmoothingSweep => {
                let eps = self.eps_multipliers();
                if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
                    return bad("smoothing sweep needs positive sweep.eps_multipliers".into());
                }
            }
            ExperimentKind::Digital => {}
        }
        if self.experiment != ExperimentKind::SmoothingSweep && self.methods.contains(&MethodName::PathwiseSmoothed) {
            let eps = self.eps_multipliers();
            if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
                return bad("pathwise_smoothed needs sweep.eps_multipliers".into());
            }
        }
        Ok(())
    }
}
