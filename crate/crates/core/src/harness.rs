//! Experiment runner: wires environment construction, hyperparameter search,
//! final retraining and fairness audits into reproducible report bundles.

use crate::dataset::{
    self, assemble_corpus, default_mappings, load_corpus, Corpus, FeatureSource, SensitiveMapping,
    TokenizerOptions,
};
use crate::envsynth::{
    build_environments, default_specs, max_feasible_size, split_train_val, synth_benchmark,
    CellCounts, EnvDataset, EnvRole, EnvSpec,
};
use crate::error::{Error, Result};
use crate::hpsearch::{run_search, SearchData, SearchOutcome, SearchSpace, TrialResult};
use crate::matrix::Matrix;
use crate::metrics::{evaluate, DataSplit, EvalReport};
use crate::objective::Mode;
use crate::rng::{derive_seed, Rng};
use crate::trainer::{train, HyperParams, TrainedModel};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMethod {
    #[default]
    Precomputed,
    EmbedSum,
    EmbedMean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthDataConfig {
    pub n_per_env: usize,
    #[serde(default)]
    pub d_noise: usize,
    pub q: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusDataConfig {
    pub path: PathBuf,
    pub attribute: String,
    #[serde(default)]
    pub method: EmbeddingMethod,
    #[serde(default)]
    pub vectors: Option<PathBuf>,
    #[serde(default)]
    pub sidecar: Option<PathBuf>,
    /// Per-environment size; defaults to the largest feasible even size.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub tokenizer: TokenizerOptions,
}

/// Exactly one data source per experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synth(SynthDataConfig),
    Corpus(CorpusDataConfig),
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::Erm, Mode::Irm]
}

fn default_retrain_seeds() -> usize {
    10
}

fn default_val_ratio() -> f64 {
    0.8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default = "default_specs")]
    pub specs: Vec<EnvSpec>,
    #[serde(default)]
    pub concat_indicator: bool,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub space: SearchSpace,
    /// Final retrains of the selected setting; each redraws the environments
    /// with a derived seed (training itself is deterministic).
    #[serde(default = "default_retrain_seeds")]
    pub retrain_seeds: usize,
    #[serde(default = "default_val_ratio")]
    pub val_ratio: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::Config("at least one mode required".into()));
        }
        if !(self.val_ratio > 0.0 && self.val_ratio < 1.0) {
            return Err(Error::Config(format!(
                "val_ratio {} must be strictly between 0 and 1",
                self.val_ratio
            )));
        }
        if self.retrain_seeds == 0 {
            return Err(Error::Config("retrain_seeds must be positive".into()));
        }
        if !self.specs.iter().any(|s| s.role == EnvRole::Train)
            || !self.specs.iter().any(|s| s.role == EnvRole::Test)
        {
            return Err(Error::Config(
                "specs must include at least one train and one test environment".into(),
            ));
        }
        if let DataSource::Corpus(c) = &self.data {
            if !c.path.exists() {
                return Err(Error::Config(format!(
                    "corpus file {} does not exist",
                    c.path.display()
                )));
            }
        }
        Ok(())
    }
}

/// Source data loaded once; environments are redrawn from it per seed.
pub enum PreparedData {
    Synth(SynthDataConfig),
    Corpus { corpus: Corpus, n: usize },
}

/// Load and assemble the experiment's data source.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    match &cfg.data {
        DataSource::Synth(synth) => Ok(PreparedData::Synth(synth.clone())),
        DataSource::Corpus(corpus_cfg) => {
            let corpus = load_feature_corpus(corpus_cfg)?;
            let n = match corpus_cfg.n {
                Some(n) => n,
                None => {
                    let pool = CellCounts::from_arrays(&corpus.y, &corpus.z);
                    max_feasible_size(&pool, &cfg.specs)?
                }
            };
            if n == 0 {
                return Err(Error::Capacity {
                    cell: "corpus pool".into(),
                    needed: 2,
                    available: 0,
                });
            }
            Ok(PreparedData::Corpus { corpus, n })
        }
    }
}

/// Resolve a corpus config into an assembled feature corpus.
pub fn load_feature_corpus(cfg: &CorpusDataConfig) -> Result<Corpus> {
    let records = load_corpus(&cfg.path)?;
    let mappings = default_mappings();
    let attribute = mappings
        .iter()
        .find(|m| m.attribute_name == cfg.attribute)
        .cloned()
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown sensitive attribute `{}` (expected one of {:?})",
                cfg.attribute,
                mappings
                    .iter()
                    .map(|m| m.attribute_name.as_str())
                    .collect::<Vec<_>>()
            ))
        })?;
    let sidecar = match &cfg.sidecar {
        Some(path) => Some(Matrix::load(path)?),
        None => None,
    };
    let vectors = match &cfg.vectors {
        Some(path) => Some(dataset::load_word_vectors(path)?.table),
        None => None,
    };
    let source = match cfg.method {
        EmbeddingMethod::Precomputed => FeatureSource::Precomputed {
            sidecar: sidecar.as_ref(),
        },
        EmbeddingMethod::EmbedSum => FeatureSource::EmbedSum {
            table: vectors
                .as_ref()
                .ok_or_else(|| Error::Config("embed_sum requires a word vectors file".into()))?,
            tokenizer: cfg.tokenizer.clone(),
        },
        EmbeddingMethod::EmbedMean => FeatureSource::EmbedMean {
            table: vectors
                .as_ref()
                .ok_or_else(|| Error::Config("embed_mean requires a word vectors file".into()))?,
            tokenizer: cfg.tokenizer.clone(),
        },
    };
    assemble_corpus(&records, &attribute, &mappings, &source)
}

/// Draw one realization of the experiment's environments.
pub fn realize_environments(
    data: &PreparedData,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<EnvDataset>> {
    let mut envs = match data {
        PreparedData::Synth(s) => synth_benchmark(s.n_per_env, s.d_noise, s.q, &cfg.specs, seed)?,
        PreparedData::Corpus { corpus, n } => build_environments(corpus, &cfg.specs, *n, seed)?,
    };
    if cfg.concat_indicator {
        envs = envs
            .iter()
            .map(EnvDataset::with_indicator)
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(envs)
}

/// Split one realization into training environments, the pooled InD
/// validation set, and the OOD set.
pub fn make_search_data(envs: &[EnvDataset], val_ratio: f64, seed: u64) -> Result<SearchData> {
    let mut train_envs = Vec::new();
    let mut val_parts = Vec::new();
    let mut test_parts = Vec::new();
    for (i, env) in envs.iter().enumerate() {
        match env.spec.role {
            EnvRole::Train => {
                let (tr, val) = split_train_val(env, val_ratio, derive_seed(seed, i as u64))?;
                train_envs.push(tr);
                val_parts.push(val);
            }
            EnvRole::Test => test_parts.push(env.clone()),
        }
    }
    if train_envs.is_empty() || test_parts.is_empty() {
        return Err(Error::Argument(
            "need at least one train and one test environment".into(),
        ));
    }
    let ind = DataSplit::pooled(&val_parts.iter().collect::<Vec<_>>())?;
    let ood = DataSplit::pooled(&test_parts.iter().collect::<Vec<_>>())?;
    Ok(SearchData {
        train_envs,
        ind,
        ood,
    })
}

/// One final retrain: the redrawn data seed and the two evaluation reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalRun {
    pub seed: u64,
    pub ind: EvalReport,
    pub ood: EvalReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeOutcome {
    pub mode: Mode,
    pub selected: TrialResult,
    pub trials: Vec<TrialResult>,
    pub final_runs: Vec<FinalRun>,
}

/// A row of the emitted tables. Fairness columns are reported for every
/// split; the headline OOD rows mirror the accuracy/fairness tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub split: String,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub dp_mean: f64,
    pub dp_std: f64,
    pub eo_mean: f64,
    pub eo_std: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportBundle {
    pub rows: Vec<ReportRow>,
    pub modes: Vec<ModeOutcome>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn summarize(mode: Mode, split: &str, reports: Vec<&EvalReport>) -> ReportRow {
    let acc: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let dp: Vec<f64> = reports.iter().map(|r| r.delta_dp).collect();
    let eo: Vec<f64> = reports.iter().map(|r| r.delta_eo).collect();
    let (accuracy_mean, accuracy_std) = mean_std(&acc);
    let (dp_mean, dp_std) = mean_std(&dp);
    let (eo_mean, eo_std) = mean_std(&eo);
    ReportRow {
        method: mode.to_string(),
        split: split.to_string(),
        accuracy_mean,
        accuracy_std,
        dp_mean,
        dp_std,
        eo_mean,
        eo_std,
        n_seeds: reports.len(),
    }
}

/// Run the full shift experiment: build environments, search hyperparameters
/// per mode, retrain the selected setting over fresh environment draws, and
/// evaluate accuracy and fairness on InD and OOD. Partial artifacts are
/// flushed to `out_dir` as stages complete.
pub fn run_shift_experiment(
    cfg: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<ReportBundle> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let data = prepare_data(cfg)?;

    // Selection phase: one realization shared by every mode.
    let selection_envs = realize_environments(&data, cfg, derive_seed(seed, 0))?;
    let search_data = make_search_data(&selection_envs, cfg.val_ratio, derive_seed(seed, 1))?;

    let mut outcomes = Vec::new();
    for (m, &mode) in cfg.modes.iter().enumerate() {
        let space = SearchSpace {
            mode,
            ..cfg.space.clone()
        };
        let outcome: SearchOutcome =
            run_search(&search_data, &space, derive_seed(seed, 100 + m as u64))?;
        write_trials_csv(&outcome.all, &out_dir.join(format!("trials-{mode}.csv")))?;
        std::fs::write(
            out_dir.join(format!("selected-{mode}.json")),
            selected_setting_json(&outcome.best)?,
        )?;

        // Final phase: retrain the selected setting on fresh draws.
        let mut final_runs = Vec::with_capacity(cfg.retrain_seeds);
        for s in 0..cfg.retrain_seeds {
            let run_seed = derive_seed(seed, 1000 + s as u64);
            let envs = realize_environments(&data, cfg, run_seed)?;
            let split = make_search_data(&envs, cfg.val_ratio, derive_seed(run_seed, 1))?;
            let model = train(&split.train_envs, &outcome.best.hp, run_seed)?;
            final_runs.push(FinalRun {
                seed: run_seed,
                ind: evaluate(&model, &split.ind)?,
                ood: evaluate(&model, &split.ood)?,
            });
        }
        outcomes.push(ModeOutcome {
            mode,
            selected: outcome.best,
            trials: outcome.all,
            final_runs,
        });
    }

    let mut rows = Vec::new();
    for outcome in &outcomes {
        rows.push(summarize(
            outcome.mode,
            "ind",
            outcome.final_runs.iter().map(|r| &r.ind).collect(),
        ));
        rows.push(summarize(
            outcome.mode,
            "ood",
            outcome.final_runs.iter().map(|r| &r.ood).collect(),
        ));
    }
    let bundle = ReportBundle {
        rows,
        modes: outcomes,
    };

    std::fs::write(out_dir.join("bundle.json"), bundle_json(&bundle)?)?;
    emit_report(&bundle, ReportFormat::Csv, &out_dir.join("report.csv"))?;
    emit_report(&bundle, ReportFormat::Markdown, &out_dir.join("report.md"))?;
    Ok(bundle)
}

pub fn bundle_json(bundle: &ReportBundle) -> Result<String> {
    serde_json::to_string_pretty(bundle).map_err(|e| Error::Schema(e.to_string()))
}

/// The selected setting, labelled for what it is: oracle selection consults
/// OOD accuracy, so the choice leaks test information by construction.
fn selected_setting_json(best: &TrialResult) -> Result<String> {
    #[derive(Serialize)]
    struct Selected<'a> {
        selection: &'static str,
        aggregate_accuracy: f64,
        #[serde(flatten)]
        trial: &'a TrialResult,
    }
    serde_json::to_string_pretty(&Selected {
        selection: "oracle-selected (consults OOD accuracy)",
        aggregate_accuracy: best.aggregate_accuracy(),
        trial: best,
    })
    .map_err(|e| Error::Schema(e.to_string()))
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_trials_csv(trials: &[TrialResult], path: &Path) -> Result<()> {
    let mut out = String::from(
        "setting,learning_rate,iterations,l2,penalty_lambda,anneal_iters,\
         mean_train_loss,mean_ind_loss,mean_ind_acc,mean_ood_acc,aggregate_accuracy\n",
    );
    for (i, t) in trials.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{},{},{},{},{},{},{}\n",
            fmt(t.hp.learning_rate),
            t.hp.iterations,
            fmt(t.hp.l2),
            fmt(t.hp.penalty_lambda),
            t.hp.anneal_iters,
            fmt(t.mean_train_loss),
            fmt(t.mean_ind_loss),
            fmt(t.mean_ind_acc),
            fmt(t.mean_ood_acc),
            fmt(t.aggregate_accuracy()),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

pub const REPORT_COLUMNS: &str =
    "method,split,accuracy_mean,accuracy_std,dp_mean,dp_std,eo_mean,eo_std,n_seeds";

pub fn render_report(rows: &[ReportRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(REPORT_COLUMNS);
            out.push('\n');
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    r.method,
                    r.split,
                    fmt(r.accuracy_mean),
                    fmt(r.accuracy_std),
                    fmt(r.dp_mean),
                    fmt(r.dp_std),
                    fmt(r.eo_mean),
                    fmt(r.eo_std),
                    r.n_seeds
                ));
            }
            out
        }
        ReportFormat::Markdown => {
            let mut out = String::from(
                "| method | split | accuracy_mean | accuracy_std | dp_mean | dp_std | eo_mean | eo_std | n_seeds |\n\
                 |---|---|---|---|---|---|---|---|---|\n",
            );
            for r in rows {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
                    r.method,
                    r.split,
                    fmt(r.accuracy_mean),
                    fmt(r.accuracy_std),
                    fmt(r.dp_mean),
                    fmt(r.dp_std),
                    fmt(r.eo_mean),
                    fmt(r.eo_std),
                    r.n_seeds
                ));
            }
            out
        }
    }
}

/// Write the report rows in the fixed column order. Deterministic: the same
/// bundle always produces byte-identical files.
pub fn emit_report(bundle: &ReportBundle, format: ReportFormat, path: &Path) -> Result<()> {
    std::fs::write(path, render_report(&bundle.rows, format))?;
    Ok(())
}

/// Combine per-attribute report rows into identity-averaged rows: for each
/// (method, split) pair present in every bundle, the unweighted mean over
/// attributes of each numeric column. Attributes contribute equally
/// regardless of their environment sizes.
pub fn average_over_attributes(bundles: &[ReportBundle]) -> Result<Vec<ReportRow>> {
    let first = bundles
        .first()
        .ok_or_else(|| Error::Argument("no bundles to average".into()))?;
    let k = bundles.len() as f64;
    let mut rows = Vec::with_capacity(first.rows.len());
    for template in &first.rows {
        let mut acc = ReportRow {
            method: template.method.clone(),
            split: template.split.clone(),
            accuracy_mean: 0.0,
            accuracy_std: 0.0,
            dp_mean: 0.0,
            dp_std: 0.0,
            eo_mean: 0.0,
            eo_std: 0.0,
            n_seeds: template.n_seeds,
        };
        for bundle in bundles {
            let row = bundle
                .rows
                .iter()
                .find(|r| r.method == template.method && r.split == template.split)
                .ok_or_else(|| {
                    Error::Argument(format!(
                        "bundle missing row for ({}, {})",
                        template.method, template.split
                    ))
                })?;
            acc.accuracy_mean += row.accuracy_mean / k;
            acc.accuracy_std += row.accuracy_std / k;
            acc.dp_mean += row.dp_mean / k;
            acc.dp_std += row.dp_std / k;
            acc.eo_mean += row.eo_mean / k;
            acc.eo_std += row.eo_std / k;
            acc.n_seeds = acc.n_seeds.min(row.n_seeds);
        }
        rows.push(acc);
    }
    Ok(rows)
}

/// Default grid for the heuristic upper bound; contains the reported best
/// point (lr 0.01, l2 0.005).
pub fn oracle_bound_grid() -> (Vec<f64>, Vec<f64>) {
    (
        vec![0.001, 0.003, 0.01, 0.03],
        vec![0.0005, 0.001, 0.005, 0.01, 0.05],
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleBoundConfig {
    pub corpus: CorpusDataConfig,
    #[serde(default = "default_bound_iterations")]
    pub iterations: u64,
    /// Minimum usable balanced pool; below this the estimate is meaningless.
    #[serde(default = "default_min_pool")]
    pub min_pool: usize,
}

fn default_bound_iterations() -> u64 {
    2000
}

fn default_min_pool() -> usize {
    40
}

impl OracleBoundConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleBoundOutcome {
    pub test_accuracy: f64,
    pub best_learning_rate: f64,
    pub best_l2: f64,
    pub pool_size: usize,
    pub split_sizes: (usize, usize, usize),
}

/// 70-15-15 split sizes: train and validation floor, test takes the rest.
pub fn oracle_split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (0.70 * n as f64).floor() as usize;
    let val = (0.15 * n as f64).floor() as usize;
    (train, val, n - train - val)
}

/// Heuristic upper bound: train a plain classifier on a toxicity-balanced
/// subset of the records that reference no demographic group, grid-searching
/// learning rate and L2 on validation accuracy, and report test accuracy.
pub fn run_oracle_bound(cfg: &OracleBoundConfig, seed: u64) -> Result<OracleBoundOutcome> {
    let records = load_corpus(&cfg.corpus.path)?;
    let mappings = default_mappings();

    // Identity-free subset: about no attribute at all.
    let keep: Vec<usize> = (0..records.len())
        .filter(|&i| {
            mappings.iter().all(|m| {
                dataset::resolve_sensitive_attribute(&records[i], m, &mappings)
                    != dataset::AttributeResolution::Present
            }) && mappings.iter().all(|m| {
                dataset::resolve_sensitive_attribute(&records[i], m, &mappings)
                    != dataset::AttributeResolution::Excluded
            })
        })
        .collect();

    let sidecar = match &cfg.corpus.sidecar {
        Some(path) => Some(Matrix::load(path)?),
        None => None,
    };
    let mut toxic = Vec::new();
    let mut clean = Vec::new();
    for &i in &keep {
        let label = dataset::binarize_toxicity(records[i].toxicity)?;
        if label == 1 {
            toxic.push(i);
        } else {
            clean.push(i);
        }
    }
    // Balance 50/50 by downsampling the larger class, seeded.
    let mut rng = Rng::new(derive_seed(seed, 0));
    rng.shuffle(&mut toxic);
    rng.shuffle(&mut clean);
    let per_class = toxic.len().min(clean.len());
    let pool_size = per_class * 2;
    if pool_size < cfg.min_pool {
        return Err(Error::Capacity {
            cell: "identity-free balanced pool".into(),
            needed: cfg.min_pool,
            available: pool_size,
        });
    }
    let mut chosen: Vec<usize> = toxic[..per_class]
        .iter()
        .chain(clean[..per_class].iter())
        .copied()
        .collect();
    Rng::new(derive_seed(seed, 1)).shuffle(&mut chosen);

    let feature_of = |i: usize| -> Result<Vec<f32>> {
        match (&records[i].embedding, &sidecar) {
            (Some(e), _) => Ok(e.clone()),
            (None, Some(m)) => Ok(m.row(i).to_vec()),
            (None, None) => Err(Error::Schema(format!(
                "record `{}` has no embedding and no sidecar was given",
                records[i].id
            ))),
        }
    };
    let rows: Vec<Vec<f32>> = chosen
        .iter()
        .map(|&i| feature_of(i))
        .collect::<Result<_>>()?;
    let features = Matrix::from_rows(&rows)?;
    let y: Vec<u8> = chosen
        .iter()
        .map(|&i| dataset::binarize_toxicity(records[i].toxicity))
        .collect::<Result<_>>()?;

    let sizes = oracle_split_sizes(pool_size);
    let make_env = |lo: usize, hi: usize, name: &str| -> Result<EnvDataset> {
        let idx: Vec<usize> = (lo..hi).collect();
        EnvDataset::from_parts(
            EnvSpec::new(name, 0.5, EnvRole::Train),
            idx.iter().map(|&i| format!("b{i}")).collect(),
            features.select_rows(&idx),
            idx.iter().map(|&i| y[i]).collect(),
            vec![0; idx.len()],
        )
    };
    let train_env = make_env(0, sizes.0, "bound-train")?;
    let val_env = make_env(sizes.0, sizes.0 + sizes.1, "bound-val")?;
    let test_env = make_env(sizes.0 + sizes.1, pool_size, "bound-test")?;

    let (lrs, l2s) = oracle_bound_grid();
    let mut best: Option<(f64, f64, f64, TrainedModel)> = None;
    for &lr in &lrs {
        for &l2 in &l2s {
            let hp = HyperParams {
                learning_rate: lr,
                iterations: cfg.iterations,
                l2,
                penalty_lambda: 0.0,
                anneal_iters: 0,
                mode: Mode::Erm,
                rescale: true,
            };
            let model = train(std::slice::from_ref(&train_env), &hp, seed)?;
            let val_acc = crate::metrics::accuracy(
                &crate::trainer::predict(&model, &val_env.features)?,
                &val_env.y,
            )?;
            // strict improvement keeps the earliest grid point on ties
            if best.as_ref().is_none_or(|(acc, _, _, _)| val_acc > *acc) {
                best = Some((val_acc, lr, l2, model));
            }
        }
    }
    let (_, best_lr, best_l2, model) = best.expect("grid is never empty");
    let test_accuracy = crate::metrics::accuracy(
        &crate::trainer::predict(&model, &test_env.features)?,
        &test_env.y,
    )?;
    Ok(OracleBoundOutcome {
        test_accuracy,
        best_learning_rate: best_lr,
        best_l2,
        pool_size,
        split_sizes: sizes,
    })
}

/// Context a `SensitiveMapping` list can be loaded from in configs.
pub fn mappings_by_name(names: &[String]) -> Result<Vec<SensitiveMapping>> {
    let all = default_mappings();
    names
        .iter()
        .map(|n| {
            all.iter()
                .find(|m| &m.attribute_name == n)
                .cloned()
                .ok_or_else(|| Error::Config(format!("unknown attribute `{n}`")))
        })
        .collect()
}
