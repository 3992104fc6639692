//! Versioned JSON snapshots of trained models.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::train::TrainedModel;
use super::{Layer, NetworkConfig, NetworkParams, Normalizer};
use crate::error::{DmlError, Result};

pub const SNAPSHOT_FORMAT: &str = "dml-lab-network";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Snapshot {
    format: String,
    version: u32,
    config: NetworkConfig,
    normalizer: Normalizer,
    layers: Vec<LayerRecord>,
    loss_history: Vec<f64>,
}

pub fn to_json(model: &TrainedModel) -> Result<String> {
    let layers = model
        .params
        .layers
        .iter()
        .map(|l| LayerRecord { weights: l.weights.outer_iter().map(|r| r.to_vec()).collect(), bias: l.bias.to_vec() })
        .collect();
    let snap = Snapshot {
        format: SNAPSHOT_FORMAT.into(),
        version: SNAPSHOT_VERSION,
        config: model.config,
        normalizer: model.normalizer.clone(),
        layers,
        loss_history: model.loss_history.clone(),
    };
    serde_json::to_string_pretty(&snap).map_err(|e| DmlError::InvalidInput(format!("snapshot encoding failed: {e}")))
}

pub fn from_json(text: &str) -> Result<TrainedModel> {
    let snap: Snapshot =
        serde_json::from_str(text).map_err(|e| DmlError::InvalidInput(format!("malformed snapshot: {e}")))?;
    if snap.format != SNAPSHOT_FORMAT || snap.version != SNAPSHOT_VERSION {
        return Err(DmlError::InvalidInput(format!(
            "unsupported snapshot {} v{}, expected {SNAPSHOT_FORMAT} v{SNAPSHOT_VERSION}",
            snap.format, snap.version
        )));
    }
    snap.config.validate()?;
    let widths = snap.config.widths();
    if snap.layers.len() + 1 != widths.len() || snap.normalizer.dim() != snap.config.input_dim {
        return Err(DmlError::InvalidInput("snapshot shapes disagree with its config".into()));
    }
    let mut layers = Vec::with_capacity(snap.layers.len());
    for (rec, w) in snap.layers.into_iter().zip(widths.windows(2)) {
        let (fan_in, fan_out) = (w[0], w[1]);
        if rec.weights.len() != fan_in || rec.weights.iter().any(|r| r.len() != fan_out) || rec.bias.len() != fan_out {
            return Err(DmlError::InvalidInput("snapshot layer has the wrong shape".into()));
        }
        let flat: Vec<f64> = rec.weights.into_iter().flatten().collect();
        let weights = Array2::from_shape_vec((fan_in, fan_out), flat).expect("shape checked");
        layers.push(Layer { weights, bias: Array1::from(rec.bias) });
    }
    Ok(TrainedModel {
        config: snap.config,
        params: NetworkParams { layers },
        normalizer: snap.normalizer,
        loss_history: snap.loss_history,
    })
}

pub fn save(model: &TrainedModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(model)?).map_err(|e| DmlError::io(path, e))
}

pub fn load(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| DmlError::io(path, e))?;
    from_json(&text)
}
