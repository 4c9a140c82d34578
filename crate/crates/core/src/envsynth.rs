//! Environment construction: exact (y, z) cell counts for a target
//! label-switching probability, corpus sampling, train/validation splits, and
//! the fully synthetic benchmark with known Bayes rates.

use crate::dataset::Corpus;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, Rng};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvRole {
    Train,
    Test,
}

/// One environment to build: its name, label-switching probability p, and
/// whether it is a training or testing environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub p: f64,
    pub role: EnvRole,
}

impl EnvSpec {
    pub fn new(name: &str, p: f64, role: EnvRole) -> Self {
        EnvSpec {
            name: name.to_string(),
            p,
            role,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Range {
                field: format!("spec `{}` p", self.name),
                value: self.p,
            });
        }
        Ok(())
    }
}

/// The default three-environment schedule: p = 0.2 and 0.1 for training,
/// 0.9 for the held-out test environment.
pub fn default_specs() -> Vec<EnvSpec> {
    vec![
        EnvSpec::new("train-p20", 0.2, EnvRole::Train),
        EnvSpec::new("train-p10", 0.1, EnvRole::Train),
        EnvSpec::new("test-p90", 0.9, EnvRole::Test),
    ]
}

/// Counts for the four (y, z) cells of one environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    /// y = 1, z = 1
    pub n11: usize,
    /// y = 1, z = 0
    pub n10: usize,
    /// y = 0, z = 0
    pub n00: usize,
    /// y = 0, z = 1
    pub n01: usize,
}

impl CellCounts {
    pub fn total(&self) -> usize {
        self.n11 + self.n10 + self.n00 + self.n01
    }

    pub fn cell(&self, y: u8, z: u8) -> usize {
        match (y, z) {
            (1, 1) => self.n11,
            (1, 0) => self.n10,
            (0, 0) => self.n00,
            _ => self.n01,
        }
    }

    pub fn from_arrays(y: &[u8], z: &[u8]) -> CellCounts {
        let mut c = CellCounts {
            n11: 0,
            n10: 0,
            n00: 0,
            n01: 0,
        };
        for (&yi, &zi) in y.iter().zip(z) {
            match (yi, zi) {
                (1, 1) => c.n11 += 1,
                (1, 0) => c.n10 += 1,
                (0, 0) => c.n00 += 1,
                _ => c.n01 += 1,
            }
        }
        c
    }

    /// Label balance (equal y marginals) and attribute balance (equal z
    /// marginals).
    pub fn is_balanced(&self) -> bool {
        self.n11 + self.n10 == self.n00 + self.n01 && self.n11 + self.n01 == self.n10 + self.n00
    }
}

pub const CELL_NAMES: [(&str, u8, u8); 4] = [
    ("y=1,z=1", 1, 1),
    ("y=1,z=0", 1, 0),
    ("y=0,z=0", 0, 0),
    ("y=0,z=1", 0, 1),
];

/// Exact cell counts for an environment of even size `n` with
/// label-switching probability `p`: the diagonal cells get
/// round((1-p)·n/2) rows (half up), the off-diagonal cells the complement,
/// which keeps both marginals at exactly n/2.
pub fn cell_counts(p: f64, n: usize) -> Result<CellCounts> {
    if !n.is_multiple_of(2) {
        return Err(Error::Argument(format!(
            "environment size {n} must be even"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Range {
            field: "p".into(),
            value: p,
        });
    }
    let half = n / 2;
    let diag = ((1.0 - p) * half as f64 + 0.5).floor() as usize;
    let diag = diag.min(half);
    Ok(CellCounts {
        n11: diag,
        n10: half - diag,
        n00: diag,
        n01: half - diag,
    })
}

fn per_cell_needs(specs: &[EnvSpec], n: usize) -> Result<CellCounts> {
    let mut need = CellCounts {
        n11: 0,
        n10: 0,
        n00: 0,
        n01: 0,
    };
    for spec in specs {
        let c = cell_counts(spec.p, n)?;
        need.n11 += c.n11;
        need.n10 += c.n10;
        need.n00 += c.n00;
        need.n01 += c.n01;
    }
    Ok(need)
}

fn fits(pool: &CellCounts, need: &CellCounts) -> bool {
    need.n11 <= pool.n11 && need.n10 <= pool.n10 && need.n00 <= pool.n00 && need.n01 <= pool.n01
}

/// Largest even n such that every (y, z) cell of the pool can supply all
/// environments at once; 0 if no positive n works. Per-cell needs are
/// monotone in n, so this is a binary search.
pub fn max_feasible_size(pool: &CellCounts, specs: &[EnvSpec]) -> Result<usize> {
    if specs.is_empty() {
        return Err(Error::Argument(
            "at least one environment spec required".into(),
        ));
    }
    for s in specs {
        s.validate()?;
    }
    // k = n/2; needs at k are bounded below by k per env across cells, so
    // pool.total() is a safe upper bound for k.
    let mut lo = 0usize;
    let mut hi = pool.total() + 1;
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if fits(pool, &per_cell_needs(specs, 2 * mid)?) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(2 * lo)
}

/// One realized environment: its spec, the rows (ids, features, labels,
/// attributes), and the realized cell counts, which always match the arrays.
#[derive(Debug, Clone)]
pub struct EnvDataset {
    pub spec: EnvSpec,
    pub ids: Vec<String>,
    pub features: Matrix,
    pub y: Vec<u8>,
    pub z: Vec<u8>,
    pub counts: CellCounts,
}

impl EnvDataset {
    pub fn from_parts(
        spec: EnvSpec,
        ids: Vec<String>,
        features: Matrix,
        y: Vec<u8>,
        z: Vec<u8>,
    ) -> Result<Self> {
        let n = ids.len();
        if features.rows() != n || y.len() != n || z.len() != n {
            return Err(Error::Shape {
                expected: format!("{n} rows"),
                got: format!("features {}, y {}, z {}", features.rows(), y.len(), z.len()),
            });
        }
        let counts = CellCounts::from_arrays(&y, &z);
        Ok(EnvDataset {
            spec,
            ids,
            features,
            y,
            z,
            counts,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Same rows with the sensitive attribute appended as a feature column.
    pub fn with_indicator(&self) -> Result<EnvDataset> {
        let features = self.features.with_indicator_column(&self.z)?;
        EnvDataset::from_parts(
            self.spec.clone(),
            self.ids.clone(),
            features,
            self.y.clone(),
            self.z.clone(),
        )
    }
}

/// Sample disjoint environments from the corpus, without replacement, so each
/// environment realizes `cell_counts(p_e, n)` exactly. Deterministic in
/// (corpus order, specs, n, seed).
pub fn build_environments(
    corpus: &Corpus,
    specs: &[EnvSpec],
    n: usize,
    seed: u64,
) -> Result<Vec<EnvDataset>> {
    if !n.is_multiple_of(2) {
        return Err(Error::Argument(format!(
            "environment size {n} must be even"
        )));
    }
    for s in specs {
        s.validate()?;
    }
    let pool_counts = CellCounts::from_arrays(&corpus.y, &corpus.z);
    let need = per_cell_needs(specs, n)?;
    for (name, y, z) in CELL_NAMES {
        if need.cell(y, z) > pool_counts.cell(y, z) {
            return Err(Error::Capacity {
                cell: name.to_string(),
                needed: need.cell(y, z),
                available: pool_counts.cell(y, z),
            });
        }
    }

    // Four shuffled index pools, one per (y, z) cell; environments consume
    // them front to back, so disjointness is structural.
    let mut pools: Vec<Vec<usize>> = CELL_NAMES
        .iter()
        .map(|&(_, y, z)| {
            (0..corpus.len())
                .filter(|&i| corpus.y[i] == y && corpus.z[i] == z)
                .collect()
        })
        .collect();
    for (k, pool) in pools.iter_mut().enumerate() {
        Rng::new(derive_seed(seed, k as u64)).shuffle(pool);
    }
    let mut cursors = [0usize; 4];

    let mut envs = Vec::with_capacity(specs.len());
    for (e, spec) in specs.iter().enumerate() {
        let counts = cell_counts(spec.p, n)?;
        let mut indices = Vec::with_capacity(n);
        for (k, &(_, y, z)) in CELL_NAMES.iter().enumerate() {
            let take = counts.cell(y, z);
            indices.extend_from_slice(&pools[k][cursors[k]..cursors[k] + take]);
            cursors[k] += take;
        }
        Rng::new(derive_seed(seed, 4 + e as u64)).shuffle(&mut indices);
        let env = EnvDataset::from_parts(
            spec.clone(),
            indices.iter().map(|&i| corpus.ids[i].clone()).collect(),
            corpus.features.select_rows(&indices),
            indices.iter().map(|&i| corpus.y[i]).collect(),
            indices.iter().map(|&i| corpus.z[i]).collect(),
        )?;
        debug_assert_eq!(env.counts, counts);
        envs.push(env);
    }
    Ok(envs)
}

/// Seeded shuffle, then split at floor(ratio·n): (train, validation).
pub fn split_train_val(
    env: &EnvDataset,
    ratio: f64,
    seed: u64,
) -> Result<(EnvDataset, EnvDataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Argument(format!(
            "split ratio {ratio} must be strictly between 0 and 1"
        )));
    }
    let n = env.len();
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    let cut = (ratio * n as f64).floor() as usize;
    let take = |slice: &[usize]| -> Result<EnvDataset> {
        EnvDataset::from_parts(
            env.spec.clone(),
            slice.iter().map(|&i| env.ids[i].clone()).collect(),
            env.features.select_rows(slice),
            slice.iter().map(|&i| env.y[i]).collect(),
            slice.iter().map(|&i| env.z[i]).collect(),
        )
    };
    Ok((take(&order[..cut])?, take(&order[cut..])?))
}

/// Generate the synthetic benchmark. Per environment of even size
/// `n_per_env`: labels are balanced 50/50 and z realizes the exact cell
/// counts for p_e; features are [2·x_inv−1, 2·z−1, noise…] where x_inv flips
/// y independently with probability q and noise is i.i.d. standard normal.
pub fn synth_benchmark(
    n_per_env: usize,
    d_noise: usize,
    q: f64,
    specs: &[EnvSpec],
    seed: u64,
) -> Result<Vec<EnvDataset>> {
    if !n_per_env.is_multiple_of(2) || n_per_env == 0 {
        return Err(Error::Argument(format!(
            "n_per_env {n_per_env} must be even and positive"
        )));
    }
    if !(0.0..=0.5).contains(&q) {
        return Err(Error::Range {
            field: "q".into(),
            value: q,
        });
    }
    let dim = 2 + d_noise;
    let mut envs = Vec::with_capacity(specs.len());
    for (e, spec) in specs.iter().enumerate() {
        spec.validate()?;
        let counts = cell_counts(spec.p, n_per_env)?;
        let mut rng = Rng::new(derive_seed(seed, e as u64));
        let mut cells: Vec<(u8, u8)> = Vec::with_capacity(n_per_env);
        for (name_idx, &(_, y, z)) in CELL_NAMES.iter().enumerate() {
            let _ = name_idx;
            cells.extend(std::iter::repeat_n((y, z), counts.cell(y, z)));
        }
        rng.shuffle(&mut cells);

        let mut ids = Vec::with_capacity(n_per_env);
        let mut data = Vec::with_capacity(n_per_env * dim);
        let mut y = Vec::with_capacity(n_per_env);
        let mut z = Vec::with_capacity(n_per_env);
        for (i, &(yi, zi)) in cells.iter().enumerate() {
            let x_inv = if rng.bernoulli(q) { 1 - yi } else { yi };
            data.push(2.0 * x_inv as f32 - 1.0);
            data.push(2.0 * zi as f32 - 1.0);
            for _ in 0..d_noise {
                data.push(rng.standard_normal() as f32);
            }
            ids.push(format!("{}:{i}", spec.name));
            y.push(yi);
            z.push(zi);
        }
        envs.push(EnvDataset::from_parts(
            spec.clone(),
            ids,
            Matrix::from_vec(n_per_env, dim, data)?,
            y,
            z,
        )?);
    }
    Ok(envs)
}

#[derive(Serialize, Deserialize)]
struct EnvManifestEntry {
    name: String,
    p: f64,
    role: EnvRole,
    counts: CellCounts,
    matrix: String,
    ids: Vec<String>,
    y: Vec<u8>,
    z: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct EnvManifest {
    version: u32,
    environments: Vec<EnvManifestEntry>,
}

/// Write `envs.json` (spec, realized counts, ordered ids, labels) plus one
/// IRMB feature sidecar per environment.
pub fn write_env_dir(dir: &Path, envs: &[EnvDataset]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = EnvManifest {
        version: 1,
        environments: Vec::with_capacity(envs.len()),
    };
    for (i, env) in envs.iter().enumerate() {
        let matrix = format!("env-{i}.irmb");
        env.features.save(&dir.join(&matrix))?;
        manifest.environments.push(EnvManifestEntry {
            name: env.spec.name.clone(),
            p: env.spec.p,
            role: env.spec.role,
            counts: env.counts,
            matrix,
            ids: env.ids.clone(),
            y: env.y.clone(),
            z: env.z.clone(),
        });
    }
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Schema(e.to_string()))?;
    std::fs::write(dir.join("envs.json"), json)?;
    Ok(())
}

pub fn read_env_dir(dir: &Path) -> Result<Vec<EnvDataset>> {
    let text = std::fs::read_to_string(dir.join("envs.json"))?;
    let manifest: EnvManifest =
        serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
    if manifest.version != 1 {
        return Err(Error::Format(format!(
            "unsupported manifest version {}",
            manifest.version
        )));
    }
    let mut envs = Vec::with_capacity(manifest.environments.len());
    for entry in manifest.environments {
        let features = Matrix::load(&dir.join(&entry.matrix))?;
        let env = EnvDataset::from_parts(
            EnvSpec {
                name: entry.name,
                p: entry.p,
                role: entry.role,
            },
            entry.ids,
            features,
            entry.y,
            entry.z,
        )?;
        if env.counts != entry.counts {
            return Err(Error::Schema(format!(
                "manifest counts for `{}` do not match its arrays",
                env.spec.name
            )));
        }
        envs.push(env);
    }
    Ok(envs)
}
