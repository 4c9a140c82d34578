//! Random hyperparameter search with oracle selection and the overfit
//! filter: sample settings uniformly inside fixed bounds, average each over
//! several training runs, drop settings whose validation loss drifts from the
//! training loss, then pick the best aggregate InD/OOD accuracy.

use crate::envsynth::EnvDataset;
use crate::error::{Error, Result};
use crate::metrics::{self, DataSplit};
use crate::objective::{bce_loss, Mode};
use crate::rng::{derive_seed, Rng};
use crate::trainer::{predict, train, HyperParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Bounds and protocol constants for one search.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub learning_rate: (f64, f64),
    pub iterations: (u64, u64),
    pub l2: (f64, f64),
    pub penalty_lambda: (f64, f64),
    pub anneal_iters: (u64, u64),
    pub settings_count: usize,
    pub trials_per_setting: usize,
    pub overfit_tau: f64,
    pub mode: Mode,
    pub rescale: bool,
    /// Sample learning rate, l2 and λ log-uniformly instead of uniformly.
    /// Off by default: the reference protocol is uniform on every bound.
    pub log_uniform: bool,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            learning_rate: (0.0001, 0.01),
            iterations: (10_000, 100_000),
            l2: (0.00001, 0.1),
            penalty_lambda: (100.0, 1_000_000.0),
            anneal_iters: (50, 250),
            settings_count: 50,
            trials_per_setting: 5,
            overfit_tau: 0.05,
            mode: Mode::Erm,
            rescale: true,
            log_uniform: false,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let check_f = |name: &str, (lo, hi): (f64, f64)| -> Result<()> {
            // NaN bounds must fail too, so compare through partial_cmp
            if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
                return Err(Error::Argument(format!(
                    "degenerate bounds for {name}: ({lo}, {hi})"
                )));
            }
            Ok(())
        };
        check_f("learning_rate", self.learning_rate)?;
        check_f("l2", self.l2)?;
        check_f("penalty_lambda", self.penalty_lambda)?;
        if self.iterations.0 >= self.iterations.1 {
            return Err(Error::Argument(format!(
                "degenerate bounds for iterations: {:?}",
                self.iterations
            )));
        }
        if self.anneal_iters.0 >= self.anneal_iters.1 {
            return Err(Error::Argument(format!(
                "degenerate bounds for anneal_iters: {:?}",
                self.anneal_iters
            )));
        }
        if self.settings_count == 0 || self.trials_per_setting == 0 {
            return Err(Error::Argument(
                "settings_count and trials_per_setting must be positive".into(),
            ));
        }
        if self.overfit_tau < 0.0 {
            return Err(Error::Argument(format!(
                "overfit_tau {} must be nonnegative",
                self.overfit_tau
            )));
        }
        Ok(())
    }
}

fn draw(rng: &mut Rng, (lo, hi): (f64, f64), log: bool) -> f64 {
    if log {
        rng.uniform(lo.ln(), hi.ln()).exp()
    } else {
        rng.uniform(lo, hi)
    }
}

fn draw_int(rng: &mut Rng, (lo, hi): (u64, u64)) -> u64 {
    (rng.uniform(lo as f64, hi as f64) + 0.5).floor() as u64
}

/// Draw `settings_count` hyperparameter settings, each parameter uniform on
/// its bounds (iteration counts rounded to integers). Deterministic in seed;
/// setting i consumes its own derived stream, drawing in the fixed order
/// learning rate, iterations, l2, λ, anneal iterations.
pub fn sample_settings(space: &SearchSpace, seed: u64) -> Result<Vec<HyperParams>> {
    space.validate()?;
    let mut settings = Vec::with_capacity(space.settings_count);
    for i in 0..space.settings_count {
        let mut rng = Rng::new(derive_seed(seed, i as u64));
        settings.push(HyperParams {
            learning_rate: draw(&mut rng, space.learning_rate, space.log_uniform),
            iterations: draw_int(&mut rng, space.iterations),
            l2: draw(&mut rng, space.l2, space.log_uniform),
            penalty_lambda: draw(&mut rng, space.penalty_lambda, space.log_uniform),
            anneal_iters: draw_int(&mut rng, space.anneal_iters),
            mode: space.mode,
            rescale: space.rescale,
        });
    }
    Ok(settings)
}

/// One training run inside a trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRun {
    pub seed: u64,
    pub train_loss: f64,
    pub ind_loss: f64,
    pub ind_acc: f64,
    pub ood_acc: f64,
}

/// A hyperparameter setting with its per-run values and their means.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub hp: HyperParams,
    pub runs: Vec<TrialRun>,
    pub mean_train_loss: f64,
    pub mean_ind_loss: f64,
    pub mean_ind_acc: f64,
    pub mean_ood_acc: f64,
}

impl TrialResult {
    pub fn from_runs(hp: HyperParams, runs: Vec<TrialRun>) -> Self {
        let n = runs.len().max(1) as f64;
        let mean = |f: fn(&TrialRun) -> f64| runs.iter().map(f).sum::<f64>() / n;
        TrialResult {
            mean_train_loss: mean(|r| r.train_loss),
            mean_ind_loss: mean(|r| r.ind_loss),
            mean_ind_acc: mean(|r| r.ind_acc),
            mean_ood_acc: mean(|r| r.ood_acc),
            hp,
            runs,
        }
    }

    /// The oracle-selection score: unweighted mean of InD and OOD accuracy.
    pub fn aggregate_accuracy(&self) -> f64 {
        (self.mean_ind_acc + self.mean_ood_acc) / 2.0
    }

    /// Gap the overfit filter inspects.
    pub fn overfit_gap(&self) -> f64 {
        (self.mean_ind_loss - self.mean_train_loss).abs()
    }
}

/// Keep trials whose |InD loss − train loss| is at most tau. The boundary is
/// inclusive: a gap of exactly tau is retained.
pub fn overfit_filter(trials: &[TrialResult], tau: f64) -> Vec<TrialResult> {
    trials
        .iter()
        .filter(|t| t.overfit_gap() <= tau)
        .cloned()
        .collect()
}

/// Highest aggregate InD/OOD accuracy; ties break to the earlier list index.
pub fn oracle_select(trials: &[TrialResult]) -> Result<&TrialResult> {
    let mut best: Option<&TrialResult> = None;
    for t in trials {
        if best.is_none_or(|b| t.aggregate_accuracy() > b.aggregate_accuracy()) {
            best = Some(t);
        }
    }
    best.ok_or(Error::NoCandidates)
}

/// Prepared data for one search: training environments plus the InD and OOD
/// evaluation splits.
#[derive(Debug, Clone)]
pub struct SearchData {
    pub train_envs: Vec<EnvDataset>,
    pub ind: DataSplit,
    pub ood: DataSplit,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Oracle-selected setting (post filter).
    pub best: TrialResult,
    /// Every evaluated setting, in sampling order.
    pub all: Vec<TrialResult>,
}

fn run_one(data: &SearchData, hp: &HyperParams, seed: u64) -> Result<TrialRun> {
    let model = train(&data.train_envs, hp, seed)?;
    let ind_loss = bce_loss(&model.params, &data.ind.features, &data.ind.y)?;
    let ind_acc = metrics::accuracy(&predict(&model, &data.ind.features)?, &data.ind.y)?;
    let ood_acc = metrics::accuracy(&predict(&model, &data.ood.features)?, &data.ood.y)?;
    Ok(TrialRun {
        seed,
        train_loss: model.final_train_loss,
        ind_loss,
        ind_acc,
        ood_acc,
    })
}

/// Evaluate every sampled setting over `trials_per_setting` runs with derived
/// seeds, filter, and oracle-select. Runs are independent and collected in
/// index order, so the outcome is identical at any parallelism degree.
pub fn run_search(data: &SearchData, space: &SearchSpace, base_seed: u64) -> Result<SearchOutcome> {
    if data.train_envs.is_empty() {
        return Err(Error::Argument("search needs training environments".into()));
    }
    if data.ind.is_empty() || data.ood.is_empty() {
        return Err(Error::Argument(
            "search needs non-empty InD and OOD splits".into(),
        ));
    }
    let settings = sample_settings(space, base_seed)?;
    let trials = space.trials_per_setting;

    let jobs: Vec<(usize, usize)> = (0..settings.len())
        .flat_map(|i| (0..trials).map(move |j| (i, j)))
        .collect();
    let runs: Vec<Result<TrialRun>> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let seed = derive_seed(base_seed, (i * trials + j) as u64);
            run_one(data, &settings[i], seed)
        })
        .collect();

    let mut all = Vec::with_capacity(settings.len());
    let mut runs = runs.into_iter();
    for hp in settings {
        let mut setting_runs = Vec::with_capacity(trials);
        for _ in 0..trials {
            setting_runs.push(runs.next().expect("job count mismatch")?);
        }
        all.push(TrialResult::from_runs(hp, setting_runs));
    }

    let kept = overfit_filter(&all, space.overfit_tau);
    let best = oracle_select(&kept)?.clone();
    Ok(SearchOutcome { best, all })
}
