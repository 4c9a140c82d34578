//! The training objective: linear scorer, BCE risk, L2 penalty, the
//! squared dummy-classifier-gradient invariance penalty with closed-form
//! gradients, and a finite-difference oracle for checking them.
//!
//! All math here is 64-bit; feature storage stays 32-bit.

use crate::envsynth::EnvDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Erm,
    Irm,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Erm => write!(f, "erm"),
            Mode::Irm => write!(f, "irm"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "erm" => Ok(Mode::Erm),
            "irm" => Ok(Mode::Irm),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// Weights and bias of the linear scorer. The dummy classifier w = 1.0 the
/// invariance penalty differentiates through is a fixed constant of the
/// objective, not a parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: Vec<f64>,
    pub bias: f64,
}

impl ModelParams {
    pub fn zeros(dim: usize) -> Self {
        ModelParams {
            theta: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.theta.iter().all(|v| v.is_finite())
    }
}

/// Objective settings for one evaluation: mode, the current penalty weight
/// λ_t, L2 strength, and whether to divide through by λ_t once it exceeds 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub mode: Mode,
    pub penalty_weight: f64,
    pub l2: f64,
    pub rescale: bool,
}

/// Gradient with respect to ModelParams.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub theta: Vec<f64>,
    pub bias: f64,
}

impl Gradient {
    pub fn zeros(dim: usize) -> Self {
        Gradient {
            theta: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.theta.iter().all(|v| v.is_finite())
    }
}

pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^s) without overflow for large |s|.
pub fn softplus(s: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

fn check_dim(params: &ModelParams, cols: usize) -> Result<()> {
    if params.dim() != cols {
        return Err(Error::Shape {
            expected: format!("{} features", params.dim()),
            got: format!("{cols}"),
        });
    }
    Ok(())
}

fn dot_row(theta: &[f64], row: &[f32]) -> f64 {
    theta
        .iter()
        .zip(row)
        .map(|(&t, &x)| t * x as f64)
        .sum::<f64>()
}

/// Raw scores s_i = θ·x_i + bias.
pub fn logits(params: &ModelParams, features: &Matrix) -> Result<Vec<f64>> {
    check_dim(params, features.cols())?;
    Ok((0..features.rows())
        .map(|i| dot_row(&params.theta, features.row(i)) + params.bias)
        .collect())
}

fn require_nonempty(env: &EnvDataset) -> Result<()> {
    if env.is_empty() {
        return Err(Error::Argument(format!(
            "environment `{}` is empty",
            env.spec.name
        )));
    }
    Ok(())
}

/// Mean BCE of the scorer on raw arrays: (1/n) Σ softplus(s_i) − y_i s_i.
pub fn bce_loss(params: &ModelParams, features: &Matrix, y: &[u8]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::Argument("bce_loss needs at least one sample".into()));
    }
    let s = logits(params, features)?;
    let total: f64 = s
        .iter()
        .zip(y)
        .map(|(&si, &yi)| softplus(si) - yi as f64 * si)
        .sum();
    Ok(total / y.len() as f64)
}

/// Mean BCE over one environment.
pub fn env_risk(params: &ModelParams, env: &EnvDataset) -> Result<f64> {
    require_nonempty(env)?;
    bce_loss(params, &env.features, &env.y)
}

/// Unweighted invariance penalty for one environment: the squared derivative
/// at w = 1 of the environment risk under scaled logits w·s_i, which is
/// g² with g = (1/n) Σ (σ(s_i) − y_i) s_i.
pub fn irm_penalty(params: &ModelParams, env: &EnvDataset) -> Result<f64> {
    require_nonempty(env)?;
    let s = logits(params, &env.features)?;
    let g: f64 = s
        .iter()
        .zip(&env.y)
        .map(|(&si, &yi)| (sigmoid(si) - yi as f64) * si)
        .sum::<f64>()
        / env.len() as f64;
    Ok(g * g)
}

/// Sample-size-weighted BCE over several environments pooled together.
pub fn pooled_risk(params: &ModelParams, envs: &[EnvDataset]) -> Result<f64> {
    if envs.is_empty() {
        return Err(Error::Argument("no environments given".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for env in envs {
        require_nonempty(env)?;
        total += env_risk(params, env)? * env.len() as f64;
        count += env.len();
    }
    Ok(total / count as f64)
}

/// Value and analytic gradient of
///   Σ_e [ R^e + λ_t·D_e ] + l2·‖θ‖²   (bias excluded from L2),
/// where D_e is the invariance penalty and λ_t = 0 in ERM mode. When
/// `rescale` is set and λ_t > 1 the value and gradient are divided by λ_t.
pub fn objective_value_and_grad(
    params: &ModelParams,
    envs: &[EnvDataset],
    cfg: &ObjectiveConfig,
) -> Result<(f64, Gradient)> {
    if envs.is_empty() {
        return Err(Error::Argument("no environments given".into()));
    }
    let d = params.dim();
    let lambda = match cfg.mode {
        Mode::Erm => 0.0,
        Mode::Irm => cfg.penalty_weight,
    };
    let mut value = 0.0;
    let mut grad = Gradient::zeros(d);

    let mut scores = Vec::new();
    for env in envs {
        require_nonempty(env)?;
        check_dim(params, env.dim())?;
        let n = env.len();
        let inv_n = 1.0 / n as f64;

        scores.clear();
        scores.reserve(n);
        let mut risk_sum = 0.0;
        let mut g_sum = 0.0;
        for i in 0..n {
            let s = dot_row(&params.theta, env.features.row(i)) + params.bias;
            let y = env.y[i] as f64;
            risk_sum += softplus(s) - y * s;
            g_sum += (sigmoid(s) - y) * s;
            scores.push(s);
        }
        let risk = risk_sum * inv_n;
        let g = g_sum * inv_n;
        value += risk;
        if lambda != 0.0 {
            value += lambda * g * g;
        }

        // Per-sample coefficient folding the risk gradient and, when active,
        // the penalty chain rule 2g·dg:
        //   dR/dθ  = (1/n) Σ (σ(s)−y)·x
        //   dD/dθ  = 2g·(1/n) Σ [σ'(s)·s + (σ(s)−y)]·x
        for (i, &s) in scores.iter().enumerate() {
            let y = env.y[i] as f64;
            let sig = sigmoid(s);
            let r = sig - y;
            let mut coeff = r * inv_n;
            if lambda != 0.0 {
                let dg = sig * (1.0 - sig) * s + r;
                coeff += lambda * 2.0 * g * dg * inv_n;
            }
            for (gj, &xj) in grad.theta.iter_mut().zip(env.features.row(i)) {
                *gj += coeff * xj as f64;
            }
            grad.bias += coeff;
        }
    }

    if cfg.l2 != 0.0 {
        let norm_sq: f64 = params.theta.iter().map(|t| t * t).sum();
        value += cfg.l2 * norm_sq;
        for (gj, &tj) in grad.theta.iter_mut().zip(&params.theta) {
            *gj += 2.0 * cfg.l2 * tj;
        }
    }

    if cfg.rescale && lambda > 1.0 {
        value /= lambda;
        for gj in &mut grad.theta {
            *gj /= lambda;
        }
        grad.bias /= lambda;
    }

    Ok((value, grad))
}

/// Central finite differences of the objective value on every coordinate of
/// ModelParams. Test oracle for the analytic gradient.
pub fn finite_diff_grad(
    params: &ModelParams,
    envs: &[EnvDataset],
    cfg: &ObjectiveConfig,
    h: f64,
) -> Result<Gradient> {
    // rejects zero, negatives and NaN alike
    if h.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Argument(format!(
            "step size h = {h} must be positive"
        )));
    }
    let value_at =
        |p: &ModelParams| -> Result<f64> { Ok(objective_value_and_grad(p, envs, cfg)?.0) };
    let mut grad = Gradient::zeros(params.dim());
    let mut probe = params.clone();
    for j in 0..params.dim() {
        let orig = probe.theta[j];
        probe.theta[j] = orig + h;
        let plus = value_at(&probe)?;
        probe.theta[j] = orig - h;
        let minus = value_at(&probe)?;
        probe.theta[j] = orig;
        grad.theta[j] = (plus - minus) / (2.0 * h);
    }
    let orig = probe.bias;
    probe.bias = orig + h;
    let plus = value_at(&probe)?;
    probe.bias = orig - h;
    let minus = value_at(&probe)?;
    grad.bias = (plus - minus) / (2.0 * h);
    Ok(grad)
}

/// Relative error between two gradients: ‖a − b‖ / max(‖b‖, floor).
pub fn gradient_relative_error(a: &Gradient, b: &Gradient) -> f64 {
    let mut diff_sq = (a.bias - b.bias).powi(2);
    let mut norm_sq = b.bias.powi(2);
    for (x, y) in a.theta.iter().zip(&b.theta) {
        diff_sq += (x - y).powi(2);
        norm_sq += y.powi(2);
    }
    diff_sq.sqrt() / norm_sq.sqrt().max(1e-12)
}
