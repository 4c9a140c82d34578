//! Command-line front end: synthesize environments, train and evaluate
//! models, run hyperparameter searches and full experiments.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 when the corpus
//! cannot supply the requested environment sizes, 1 otherwise.

use clap::{Parser, Subcommand};
use irmkit::envsynth::{
    default_specs, read_env_dir, synth_benchmark, write_env_dir, EnvRole, EnvSpec,
};
use irmkit::error::{Error, Result};
use irmkit::harness::{
    self, load_feature_corpus, CorpusDataConfig, EmbeddingMethod, ExperimentConfig,
    OracleBoundConfig, ReportBundle, ReportFormat,
};
use irmkit::hpsearch::{run_search, SearchSpace};
use irmkit::metrics::{evaluate, DataSplit};
use irmkit::objective::Mode;
use irmkit::trainer::{load_model, save_model, train, HyperParams};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "envforge",
    about = "Multi-environment spurious-correlation benchmarks: build, train, audit",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic benchmark into an environment directory.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build environments from a labeled corpus.
    #[command(visible_alias = "build")]
    BuildEnvs {
        #[arg(long)]
        corpus: PathBuf,
        /// JSON file with environment specs and corpus options.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Per-environment size; defaults to the largest feasible even size.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Sensitive attribute (overrides the spec file).
        #[arg(long)]
        attribute: Option<String>,
    },
    /// Train one model on the train-role environments of a directory.
    Train {
        #[arg(long)]
        envs: PathBuf,
        /// JSON file with hyperparameters.
        #[arg(long)]
        hp: PathBuf,
        #[arg(long)]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a saved model on an environment directory.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random hyperparameter search with the overfit filter and oracle
    /// selection.
    Hpsearch {
        #[arg(long)]
        envs: PathBuf,
        /// JSON file with search-space overrides.
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long)]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full shift experiment: search per mode, retrain, audit, report.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Heuristic upper bound from identity-free comments.
    OracleBound {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-emit report tables from a saved bundle.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Deserialize)]
struct SynthConfig {
    n_per_env: usize,
    #[serde(default)]
    d_noise: usize,
    q: f64,
    #[serde(default = "default_specs")]
    specs: Vec<EnvSpec>,
}

#[derive(Deserialize)]
struct BuildSpecFile {
    #[serde(default = "default_specs")]
    specs: Vec<EnvSpec>,
    #[serde(default)]
    attribute: Option<String>,
    #[serde(default)]
    method: EmbeddingMethod,
    #[serde(default)]
    vectors: Option<PathBuf>,
    #[serde(default)]
    sidecar: Option<PathBuf>,
    #[serde(default)]
    concat_indicator: bool,
}

impl Default for BuildSpecFile {
    fn default() -> Self {
        BuildSpecFile {
            specs: default_specs(),
            attribute: None,
            method: EmbeddingMethod::default(),
            vectors: None,
            sidecar: None,
            concat_indicator: false,
        }
    }
}

#[derive(Deserialize)]
struct EvaluateConfig {
    model: PathBuf,
    envs: PathBuf,
}

#[derive(Deserialize)]
struct ReportConfig {
    bundle: PathBuf,
    #[serde(default = "default_formats")]
    formats: Vec<ReportFormat>,
}

fn default_formats() -> Vec<ReportFormat> {
    vec![ReportFormat::Csv, ReportFormat::Markdown]
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn parse_mode(s: &str) -> Result<Mode> {
    s.parse()
}

/// The default p schedule (0.2, 0.1, 0.9) only yields integral cells when
/// n is divisible by 20; other sizes round the realized correlations.
fn warn_if_not_multiple_of_20(n: usize) {
    if !n.is_multiple_of(20) {
        eprintln!(
            "note: n = {n} is not divisible by 20; realized correlations will \
             be rounded to within 1/n of the requested p values"
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config, seed, out } => {
            let cfg: SynthConfig = read_json(&config)?;
            warn_if_not_multiple_of_20(cfg.n_per_env);
            let envs = synth_benchmark(cfg.n_per_env, cfg.d_noise, cfg.q, &cfg.specs, seed)?;
            write_env_dir(&out, &envs)?;
            println!(
                "wrote {} environments ({} rows each) to {}",
                envs.len(),
                cfg.n_per_env,
                out.display()
            );
        }
        Command::BuildEnvs {
            corpus,
            spec,
            n,
            seed,
            out,
            attribute,
        } => {
            let mut spec_file: BuildSpecFile = match &spec {
                Some(path) => read_json(path)?,
                None => BuildSpecFile::default(),
            };
            if let Some(attr) = attribute {
                spec_file.attribute = Some(attr);
            }
            let attr = spec_file.attribute.clone().ok_or_else(|| {
                Error::Config("a sensitive attribute is required (--attribute or spec file)".into())
            })?;
            let corpus_cfg = CorpusDataConfig {
                path: corpus,
                attribute: attr,
                method: spec_file.method,
                vectors: spec_file.vectors.clone(),
                sidecar: spec_file.sidecar.clone(),
                n,
                tokenizer: irmkit::dataset::TokenizerOptions::default(),
            };
            let assembled = load_feature_corpus(&corpus_cfg)?;
            let size = match n {
                Some(v) => v,
                None => {
                    let pool =
                        irmkit::envsynth::CellCounts::from_arrays(&assembled.y, &assembled.z);
                    irmkit::envsynth::max_feasible_size(&pool, &spec_file.specs)?
                }
            };
            if size == 0 {
                return Err(Error::Capacity {
                    cell: "corpus pool".into(),
                    needed: 2,
                    available: 0,
                });
            }
            warn_if_not_multiple_of_20(size);
            let mut envs =
                irmkit::envsynth::build_environments(&assembled, &spec_file.specs, size, seed)?;
            if spec_file.concat_indicator {
                envs = envs
                    .iter()
                    .map(irmkit::envsynth::EnvDataset::with_indicator)
                    .collect::<Result<Vec<_>>>()?;
            }
            write_env_dir(&out, &envs)?;
            println!(
                "wrote {} environments ({} rows each) to {}",
                envs.len(),
                size,
                out.display()
            );
        }
        Command::Train {
            envs,
            hp,
            mode,
            seed,
            out,
        } => {
            let mode = parse_mode(&mode)?;
            let mut hp: HyperParams = read_json(&hp)?;
            hp.mode = mode;
            let all = read_env_dir(&envs)?;
            let train_envs: Vec<_> = all
                .into_iter()
                .filter(|e| e.spec.role == EnvRole::Train)
                .collect();
            let model = train(&train_envs, &hp, seed)?;
            save_model(&model, &out)?;
            println!(
                "trained {mode} model on {} environment(s), final train loss {:.6} -> {}",
                train_envs.len(),
                model.final_train_loss,
                out.display()
            );
        }
        Command::Evaluate { config, seed, out } => {
            let _ = seed; // evaluation is deterministic
            let cfg: EvaluateConfig = read_json(&config)?;
            let model = load_model(&cfg.model)?;
            let envs = read_env_dir(&cfg.envs)?;
            std::fs::create_dir_all(&out)?;
            let mut reports = Vec::new();
            let mut csv = String::from("env,role,n,accuracy,delta_dp,delta_eo\n");
            for env in &envs {
                let report = evaluate(&model, &DataSplit::from_env(env))?;
                csv.push_str(&format!(
                    "{},{:?},{},{:.6},{:.6},{:.6}\n",
                    env.spec.name,
                    env.spec.role,
                    report.n,
                    report.accuracy,
                    report.delta_dp,
                    report.delta_eo
                ));
                reports.push(serde_json::json!({
                    "env": env.spec.name,
                    "p": env.spec.p,
                    "role": env.spec.role,
                    "report": report,
                }));
            }
            let train_envs: Vec<_> = envs
                .iter()
                .filter(|e| e.spec.role == EnvRole::Train)
                .collect();
            if !train_envs.is_empty() {
                let pooled = DataSplit::pooled(&train_envs)?;
                let report = evaluate(&model, &pooled)?;
                csv.push_str(&format!(
                    "pooled-train,Train,{},{:.6},{:.6},{:.6}\n",
                    report.n, report.accuracy, report.delta_dp, report.delta_eo
                ));
                reports.push(serde_json::json!({
                    "env": "pooled-train",
                    "report": report,
                }));
            }
            std::fs::write(
                out.join("evaluation.json"),
                serde_json::to_string_pretty(&reports).map_err(|e| Error::Schema(e.to_string()))?,
            )?;
            std::fs::write(out.join("evaluation.csv"), csv)?;
            println!(
                "wrote evaluation for {} environment(s) to {}",
                envs.len(),
                out.display()
            );
        }
        Command::Hpsearch {
            envs,
            space,
            mode,
            seed,
            out,
        } => {
            let mode = parse_mode(&mode)?;
            let mut space: SearchSpace = match &space {
                Some(path) => read_json(path)?,
                None => SearchSpace::default(),
            };
            space.mode = mode;
            let all = read_env_dir(&envs)?;
            let data = harness::make_search_data(&all, 0.8, seed)?;
            let outcome = run_search(&data, &space, seed)?;
            std::fs::create_dir_all(&out)?;
            harness::write_trials_csv(&outcome.all, &out.join(format!("trials-{mode}.csv")))?;
            let selected = serde_json::to_string_pretty(&outcome.best)
                .map_err(|e| Error::Schema(e.to_string()))?;
            std::fs::write(out.join(format!("selected-{mode}.json")), selected)?;
            println!(
                "searched {} settings; best aggregate accuracy {:.4} -> {}",
                outcome.all.len(),
                outcome.best.aggregate_accuracy(),
                out.display()
            );
        }
        Command::Experiment { config, seed, out } => {
            let cfg: ExperimentConfig = read_json(&config)?;
            let bundle = harness::run_shift_experiment(&cfg, seed, &out)?;
            println!(
                "{}",
                harness::render_report(&bundle.rows, ReportFormat::Markdown)
            );
            println!("experiment artifacts in {}", out.display());
        }
        Command::OracleBound { config, seed, out } => {
            let cfg: OracleBoundConfig = read_json(&config)?;
            let outcome = harness::run_oracle_bound(&cfg, seed)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(
                out.join("oracle-bound.json"),
                serde_json::to_string_pretty(&outcome).map_err(|e| Error::Schema(e.to_string()))?,
            )?;
            println!(
                "heuristic upper bound: {:.4} (lr {}, l2 {}, pool {})",
                outcome.test_accuracy,
                outcome.best_learning_rate,
                outcome.best_l2,
                outcome.pool_size
            );
        }
        Command::Report { config, seed, out } => {
            let _ = seed;
            let cfg: ReportConfig = read_json(&config)?;
            let text = std::fs::read_to_string(&cfg.bundle)
                .map_err(|e| Error::Config(format!("cannot read bundle: {e}")))?;
            let bundle: ReportBundle =
                serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            std::fs::create_dir_all(&out)?;
            for format in cfg.formats {
                let name = match format {
                    ReportFormat::Csv => "report.csv",
                    ReportFormat::Markdown => "report.md",
                };
                harness::emit_report(&bundle, format, &out.join(name))?;
            }
            println!("re-emitted report tables to {}", out.display());
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
