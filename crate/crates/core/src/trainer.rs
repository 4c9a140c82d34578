//! Full-batch Adam on the penalized objective, prediction, and model
//! serialization.

use crate::envsynth::EnvDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::objective::{
    objective_value_and_grad, pooled_risk, sigmoid, Mode, ModelParams, ObjectiveConfig,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub iterations: u64,
    pub l2: f64,
    pub penalty_lambda: f64,
    pub anneal_iters: u64,
    pub mode: Mode,
    #[serde(default = "default_rescale")]
    pub rescale: bool,
}

fn default_rescale() -> bool {
    true
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::Argument(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Argument("iterations must be positive".into()));
        }
        if self.l2 < 0.0 || self.penalty_lambda < 0.0 {
            return Err(Error::Argument(
                "l2 and penalty_lambda must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub hp: HyperParams,
    /// Final aggregate training risk: pooled unpenalized BCE, the quantity
    /// the overfit filter compares against validation loss.
    pub final_train_loss: f64,
    pub threshold: f64,
}

/// Penalty weight at iteration t: 0 for ERM; for IRM, 1.0 during the anneal
/// phase and penalty_lambda from `anneal_iters` onward.
pub fn penalty_weight(t: u64, hp: &HyperParams) -> f64 {
    match hp.mode {
        Mode::Erm => 0.0,
        Mode::Irm => {
            if t < hp.anneal_iters {
                1.0
            } else {
                hp.penalty_lambda
            }
        }
    }
}

/// Run `hp.iterations` full-batch Adam steps from θ = 0, bias = 0.
///
/// Deterministic: the optimizer draws no randomness (the seed is part of the
/// signature for interface stability and reserved for stochastic variants).
pub fn train(envs: &[EnvDataset], hp: &HyperParams, _seed: u64) -> Result<TrainedModel> {
    hp.validate()?;
    if envs.is_empty() {
        return Err(Error::Argument("no training environments given".into()));
    }
    let dim = envs[0].dim();
    for env in envs {
        if env.dim() != dim {
            return Err(Error::Shape {
                expected: format!("{dim} features"),
                got: format!("{} in `{}`", env.dim(), env.spec.name),
            });
        }
    }

    let mut params = ModelParams::zeros(dim);
    let mut m = vec![0.0f64; dim + 1];
    let mut v = vec![0.0f64; dim + 1];

    for step in 0..hp.iterations {
        let cfg = ObjectiveConfig {
            mode: hp.mode,
            penalty_weight: penalty_weight(step, hp),
            l2: hp.l2,
            rescale: hp.rescale,
        };
        let (value, grad) = objective_value_and_grad(&params, envs, &cfg)?;
        if !value.is_finite() || !grad.is_finite() {
            return Err(Error::Divergence {
                iteration: step as usize,
            });
        }
        let t = (step + 1) as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);
        for j in 0..=dim {
            let g = if j < dim { grad.theta[j] } else { grad.bias };
            m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * g;
            v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * g * g;
            let update = hp.learning_rate * (m[j] / bc1) / ((v[j] / bc2).sqrt() + ADAM_EPS);
            if j < dim {
                params.theta[j] -= update;
            } else {
                params.bias -= update;
            }
        }
    }

    if !params.is_finite() {
        return Err(Error::Divergence {
            iteration: hp.iterations as usize,
        });
    }
    let final_train_loss = pooled_risk(&params, envs)?;
    Ok(TrainedModel {
        params,
        hp: hp.clone(),
        final_train_loss,
        threshold: 0.5,
    })
}

/// ŷ_i = 1 iff σ(s_i) ≥ threshold; σ(0) = 0.5 ties resolve to class 1.
pub fn predict(model: &TrainedModel, features: &Matrix) -> Result<Vec<u8>> {
    let scores = crate::objective::logits(&model.params, features)?;
    Ok(scores
        .iter()
        .map(|&s| if sigmoid(s) >= model.threshold { 1 } else { 0 })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    version: u32,
    bias: f64,
    threshold: f64,
    final_train_loss: f64,
    hp: HyperParams,
    theta_file: String,
}

const MODEL_VERSION: u32 = 1;

/// Write the model as a JSON header at `path` plus a sibling `.irmb` matrix
/// holding θ as one row. The IRMB container is 32-bit, so θ is quantized on
/// first save; saving a loaded model reproduces its files byte for byte.
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let theta_path = path.with_extension("irmb");
    let theta_name = theta_path
        .file_name()
        .ok_or_else(|| Error::Argument(format!("bad model path {}", path.display())))?
        .to_string_lossy()
        .into_owned();
    let theta32: Vec<f32> = model.params.theta.iter().map(|&t| t as f32).collect();
    Matrix::from_vec(1, theta32.len(), theta32)?.save(&theta_path)?;
    let header = ModelHeader {
        version: MODEL_VERSION,
        bias: model.params.bias,
        threshold: model.threshold,
        final_train_loss: model.final_train_loss,
        hp: model.hp.clone(),
        theta_file: theta_name,
    };
    let json = serde_json::to_string_pretty(&header).map_err(|e| Error::Schema(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path)?;
    let header: ModelHeader =
        serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
    if header.version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "unsupported model version {}",
            header.version
        )));
    }
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let theta = Matrix::load(&dir.join(&header.theta_file))?;
    if theta.rows() != 1 {
        return Err(Error::Format(format!(
            "model weight matrix must have one row, found {}",
            theta.rows()
        )));
    }
    let params = ModelParams {
        theta: theta.data().iter().map(|&t| t as f64).collect(),
        bias: header.bias,
    };
    if !params.is_finite() {
        return Err(Error::Format("model parameters are not finite".into()));
    }
    Ok(TrainedModel {
        params,
        hp: header.hp,
        final_train_loss: header.final_train_loss,
        threshold: header.threshold,
    })
}
