//! Accuracy and the two group-fairness distances, with per-group cell
//! diagnostics.

use crate::envsynth::EnvDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::trainer::{predict, TrainedModel};
use serde::{Deserialize, Serialize};

fn check_lengths(lens: &[usize]) -> Result<()> {
    let n = lens[0];
    if n == 0 {
        return Err(Error::Argument("metrics need at least one sample".into()));
    }
    if lens.iter().any(|&l| l != n) {
        return Err(Error::Shape {
            expected: format!("{n} entries in every array"),
            got: format!("{lens:?}"),
        });
    }
    Ok(())
}

/// Fraction of agreements between predictions and labels.
pub fn accuracy(yhat: &[u8], y: &[u8]) -> Result<f64> {
    check_lengths(&[yhat.len(), y.len()])?;
    let hits = yhat.iter().zip(y).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y.len() as f64)
}

/// Demographic parity distance: |P(ŷ=1 | a=0) − P(ŷ=1 | a=1)|.
pub fn delta_dp(yhat: &[u8], a: &[u8]) -> Result<f64> {
    check_lengths(&[yhat.len(), a.len()])?;
    let mut count = [0usize; 2];
    let mut positive = [0usize; 2];
    for (&p, &ai) in yhat.iter().zip(a) {
        let g = ai as usize;
        count[g] += 1;
        positive[g] += p as usize;
    }
    for (g, &c) in count.iter().enumerate() {
        if c == 0 {
            return Err(Error::UndefinedMetric {
                group: format!("a={g}"),
            });
        }
    }
    let rate0 = positive[0] as f64 / count[0] as f64;
    let rate1 = positive[1] as f64 / count[1] as f64;
    Ok((rate0 - rate1).abs())
}

/// Equalized odds distance: half the absolute false-positive-rate gap plus
/// half the absolute false-negative-rate gap between the two groups.
pub fn delta_eo(yhat: &[u8], y: &[u8], a: &[u8]) -> Result<f64> {
    check_lengths(&[yhat.len(), y.len(), a.len()])?;
    // counts[a][y], positives[a][y]
    let mut count = [[0usize; 2]; 2];
    let mut positive = [[0usize; 2]; 2];
    for i in 0..y.len() {
        let (ai, yi) = (a[i] as usize, y[i] as usize);
        count[ai][yi] += 1;
        positive[ai][yi] += yhat[i] as usize;
    }
    for (ai, row) in count.iter().enumerate() {
        for (yi, &c) in row.iter().enumerate() {
            if c == 0 {
                return Err(Error::UndefinedMetric {
                    group: format!("a={ai},y={yi}"),
                });
            }
        }
    }
    let fpr = |ai: usize| positive[ai][0] as f64 / count[ai][0] as f64;
    let fnr = |ai: usize| 1.0 - positive[ai][1] as f64 / count[ai][1] as f64;
    Ok(0.5 * (fpr(0) - fpr(1)).abs() + 0.5 * (fnr(0) - fnr(1)).abs())
}

/// Metrics plus the (a, y, ŷ) cell counts they were computed from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub delta_dp: f64,
    pub delta_eo: f64,
    /// Joint counts indexed by a·4 + y·2 + ŷ.
    pub cells: [u64; 8],
    pub n: usize,
}

pub fn cell_index(a: u8, y: u8, yhat: u8) -> usize {
    (a as usize) * 4 + (y as usize) * 2 + yhat as usize
}

/// Tally the eight (a, y, ŷ) cells.
pub fn tally_cells(yhat: &[u8], y: &[u8], a: &[u8]) -> [u64; 8] {
    let mut cells = [0u64; 8];
    for i in 0..y.len() {
        cells[cell_index(a[i], y[i], yhat[i])] += 1;
    }
    cells
}

/// All three metrics from a shared cell table.
pub fn report_from_cells(cells: [u64; 8], n: usize) -> Result<EvalReport> {
    let cell = |a: u8, y: u8, p: u8| cells[cell_index(a, y, p)] as f64;
    let correct = cell(0, 0, 0) + cell(0, 1, 1) + cell(1, 0, 0) + cell(1, 1, 1);

    let group = |a: u8| cell(a, 0, 0) + cell(a, 0, 1) + cell(a, 1, 0) + cell(a, 1, 1);
    for a in 0..2u8 {
        if group(a) == 0.0 {
            return Err(Error::UndefinedMetric {
                group: format!("a={a}"),
            });
        }
    }
    let pos_rate = |a: u8| (cell(a, 0, 1) + cell(a, 1, 1)) / group(a);
    let delta_dp = (pos_rate(0) - pos_rate(1)).abs();

    for a in 0..2u8 {
        for y in 0..2u8 {
            if cell(a, y, 0) + cell(a, y, 1) == 0.0 {
                return Err(Error::UndefinedMetric {
                    group: format!("a={a},y={y}"),
                });
            }
        }
    }
    let fpr = |a: u8| cell(a, 0, 1) / (cell(a, 0, 0) + cell(a, 0, 1));
    let fnr = |a: u8| cell(a, 1, 0) / (cell(a, 1, 0) + cell(a, 1, 1));
    let delta_eo = 0.5 * (fpr(0) - fpr(1)).abs() + 0.5 * (fnr(0) - fnr(1)).abs();

    Ok(EvalReport {
        accuracy: correct / n as f64,
        delta_dp,
        delta_eo,
        cells,
        n,
    })
}

/// One evaluation split: features with aligned labels and attributes.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub features: Matrix,
    pub y: Vec<u8>,
    pub z: Vec<u8>,
}

impl DataSplit {
    pub fn from_env(env: &EnvDataset) -> DataSplit {
        DataSplit {
            features: env.features.clone(),
            y: env.y.clone(),
            z: env.z.clone(),
        }
    }

    /// Concatenate several environments, e.g. the validation sides of all
    /// training environments into the InD set.
    pub fn pooled(envs: &[&EnvDataset]) -> Result<DataSplit> {
        let features = Matrix::vstack(&envs.iter().map(|e| &e.features).collect::<Vec<_>>())?;
        let y = envs.iter().flat_map(|e| e.y.iter().copied()).collect();
        let z = envs.iter().flat_map(|e| e.z.iter().copied()).collect();
        Ok(DataSplit { features, y, z })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Predict once, then compute accuracy, Δ_DP and Δ_EO from the shared cell
/// counts.
pub fn evaluate(model: &TrainedModel, split: &DataSplit) -> Result<EvalReport> {
    check_lengths(&[split.features.rows(), split.y.len(), split.z.len()])?;
    let yhat = predict(model, &split.features)?;
    let cells = tally_cells(&yhat, &split.y, &split.z);
    report_from_cells(cells, split.len())
}
