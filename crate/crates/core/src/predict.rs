//! Reference prediction harness: training-split median imputation, per-fold
//! standardization, ridge-penalized logistic regression trained by full-batch
//! gradient descent with backtracking line search, stratified k-fold cross
//! validation, and AUROC/F1 scoring.
//!
//! Everything is deterministic given the seed: fold assignment is the only
//! source of randomness and training always starts from zero weights.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::merge::DesignMatrix;
use crate::stats::{auroc, f1_binary, StatsError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PredictError {
    #[error("column {0:?} has no non-missing training values")]
    AllMissingColumn(String),
    #[error("loss or gradient became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("need at least {folds} rows for {folds}-fold cross validation, found {rows}")]
    TooFewRows { rows: usize, folds: usize },
    #[error("a class has fewer members than folds; every fold needs both classes")]
    SingleClassFold,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Training settings. The ridge penalty never touches the intercept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            lambda: 1.0,
            tolerance: 1e-6,
            max_iterations: 5000,
            seed: 0,
        }
    }
}

/// Column medians fitted on training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianImputer {
    medians: Vec<f64>,
}

impl MedianImputer {
    pub fn fit(
        rows: &[Vec<Option<f64>>],
        column_names: &[String],
    ) -> Result<MedianImputer, PredictError> {
        let width = rows.first().map_or(0, Vec::len);
        let mut medians = Vec::with_capacity(width);
        for column in 0..width {
            let mut values: Vec<f64> = rows.iter().filter_map(|row| row[column]).collect();
            if values.is_empty() {
                let name = column_names
                    .get(column)
                    .cloned()
                    .unwrap_or_else(|| format!("column {column}"));
                return Err(PredictError::AllMissingColumn(name));
            }
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
            let mid = values.len() / 2;
            let median = if values.len() % 2 == 1 {
                values[mid]
            } else {
                (values[mid - 1] + values[mid]) / 2.0
            };
            medians.push(median);
        }
        Ok(MedianImputer { medians })
    }

    pub fn medians(&self) -> &[f64] {
        &self.medians
    }

    pub fn apply(&self, rows: &[Vec<Option<f64>>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|row| {
                row.iter()
                    .zip(&self.medians)
                    .map(|(cell, &median)| cell.unwrap_or(median))
                    .collect()
            })
            .collect()
    }
}

/// Per-column mean/standard-deviation transform fitted on training rows.
/// Zero-variance columns are centered and passed through with divisor 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Standardizer {
        let n = rows.len() as f64;
        let width = rows.first().map_or(0, Vec::len);
        let mut means = vec![0.0; width];
        for row in rows {
            for (mean, value) in means.iter_mut().zip(row) {
                *mean += value;
            }
        }
        for mean in &mut means {
            *mean /= n;
        }
        let mut scales = vec![0.0; width];
        for row in rows {
            for ((scale, value), mean) in scales.iter_mut().zip(row).zip(&means) {
                *scale += (value - mean).powi(2);
            }
        }
        for (column, scale) in scales.iter_mut().enumerate() {
            *scale = (*scale / n).sqrt();
            if *scale == 0.0 {
                log::warn!("column {column} has zero variance; passing through centered");
                *scale = 1.0;
            }
        }
        Standardizer { means, scales }
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|row| {
                row.iter()
                    .zip(&self.means)
                    .zip(&self.scales)
                    .map(|((value, mean), scale)| (value - mean) / scale)
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(z)) without overflow.
fn ln_1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn margins(x: &[Vec<f64>], weights: &[f64], intercept: f64) -> Vec<f64> {
    x.iter()
        .map(|row| {
            intercept
                + row
                    .iter()
                    .zip(weights)
                    .map(|(value, weight)| value * weight)
                    .sum::<f64>()
        })
        .collect()
}

/// Mean log-loss plus the ridge term lambda/(2n) * ||w||^2.
fn objective(z: &[f64], y: &[u8], weights: &[f64], lambda: f64) -> f64 {
    let n = y.len() as f64;
    let loss: f64 = z
        .iter()
        .zip(y)
        .map(|(&z, &y)| ln_1p_exp(z) - f64::from(y) * z)
        .sum::<f64>()
        / n;
    let ridge = lambda / (2.0 * n) * weights.iter().map(|w| w * w).sum::<f64>();
    loss + ridge
}

/// Penalized log-loss and its analytic gradient at (weights, intercept).
/// The gradient vector has the intercept component last. This is exactly
/// what the training loop descends along.
pub fn objective_and_gradient(
    x: &[Vec<f64>],
    y: &[u8],
    weights: &[f64],
    intercept: f64,
    lambda: f64,
) -> (f64, Vec<f64>) {
    let n_f = x.len() as f64;
    let width = weights.len();
    let z = margins(x, weights, intercept);
    let value = objective(&z, y, weights, lambda);
    let residuals: Vec<f64> = z
        .iter()
        .zip(y)
        .map(|(&z, &y)| sigmoid(z) - f64::from(y))
        .collect();
    let mut gradient = vec![0.0f64; width + 1];
    for (row, &residual) in x.iter().zip(&residuals) {
        for (g, value) in gradient.iter_mut().zip(row) {
            *g += residual * value;
        }
    }
    for (g, w) in gradient.iter_mut().zip(weights) {
        *g = *g / n_f + lambda / n_f * w;
    }
    gradient[width] = residuals.iter().sum::<f64>() / n_f;
    (value, gradient)
}

/// Minimize the penalized log-loss by full-batch gradient descent with
/// Armijo backtracking. Deterministic: starts from zero weights.
pub fn train_logistic(
    x: &[Vec<f64>],
    y: &[u8],
    config: &TrainConfig,
) -> Result<LogisticModel, PredictError> {
    const ARMIJO_C: f64 = 1e-4;
    const BACKTRACK: f64 = 0.5;
    const MIN_STEP: f64 = 1e-12;

    let width = x.first().map_or(0, Vec::len);
    let mut weights = vec![0.0f64; width];
    let mut intercept = 0.0f64;

    let mut value = objective_and_gradient(x, y, &weights, intercept, config.lambda).0;
    let mut iterations = 0;
    let mut converged = false;

    for iteration in 0..config.max_iterations {
        iterations = iteration + 1;
        let (current, gradient) =
            objective_and_gradient(x, y, &weights, intercept, config.lambda);
        value = current;
        let (grad_w, grad_b) = (&gradient[..width], gradient[width]);

        let grad_norm_sq = grad_w.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b;
        if !value.is_finite() || !grad_norm_sq.is_finite() {
            return Err(PredictError::NonFinite { iteration });
        }
        if grad_norm_sq.sqrt() <= config.tolerance {
            converged = true;
            iterations = iteration;
            break;
        }

        let mut step = 1.0;
        loop {
            let trial_w: Vec<f64> = weights
                .iter()
                .zip(grad_w)
                .map(|(w, g)| w - step * g)
                .collect();
            let trial_b = intercept - step * grad_b;
            let trial_z = margins(x, &trial_w, trial_b);
            let trial_value = objective(&trial_z, y, &trial_w, config.lambda);
            if trial_value <= value - ARMIJO_C * step * grad_norm_sq || step < MIN_STEP {
                weights = trial_w;
                intercept = trial_b;
                value = trial_value;
                break;
            }
            step *= BACKTRACK;
        }
    }

    if !value.is_finite() {
        return Err(PredictError::NonFinite { iteration: iterations });
    }
    Ok(LogisticModel {
        weights,
        intercept,
        iterations,
        converged,
    })
}

/// Sigmoid scores in (0, 1).
pub fn predict_proba(model: &LogisticModel, x: &[Vec<f64>]) -> Vec<f64> {
    margins(x, &model.weights, model.intercept)
        .into_iter()
        .map(sigmoid)
        .collect()
}

/// Seeded stratified fold assignment: indices of each class are shuffled and
/// dealt round-robin, so every fold carries both classes whenever each class
/// has at least `k` members.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, PredictError> {
    if labels.len() < k {
        return Err(PredictError::TooFewRows {
            rows: labels.len(),
            folds: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    for class in [0u8, 1] {
        let mut indices: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == class)
            .map(|(i, _)| i)
            .collect();
        if indices.len() < k {
            return Err(PredictError::SingleClassFold);
        }
        indices.shuffle(&mut rng);
        for (position, index) in indices.into_iter().enumerate() {
            folds[position % k].push(index);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Fitted state of one fold, kept for leakage checks and inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldModel {
    pub test_indices: Vec<usize>,
    pub medians: Vec<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub fold_auroc: Vec<f64>,
    pub fold_f1: Vec<f64>,
    pub mean_auroc: f64,
    pub mean_f1: f64,
    pub fold_models: Vec<FoldModel>,
}

/// F1 decision threshold used throughout the harness.
pub const F1_THRESHOLD: f64 = 0.5;

/// Stratified k-fold cross validation. Per fold, the imputer and
/// standardizer are fitted on training rows only and applied to both splits,
/// a model is trained, and the held-out fold is scored with AUROC and F1.
pub fn cross_validate(
    design: &DesignMatrix,
    k: usize,
    config: &TrainConfig,
) -> Result<CvResult, PredictError> {
    let folds = stratified_folds(&design.outcomes, k, config.seed)?;
    let mut fold_auroc = Vec::with_capacity(k);
    let mut fold_f1 = Vec::with_capacity(k);
    let mut fold_models = Vec::with_capacity(k);

    for test_indices in &folds {
        let in_test: Vec<bool> = {
            let mut mask = vec![false; design.n_rows()];
            for &i in test_indices {
                mask[i] = true;
            }
            mask
        };
        let train_rows: Vec<Vec<Option<f64>>> = design
            .rows
            .iter()
            .zip(&in_test)
            .filter(|(_, &t)| !t)
            .map(|(row, _)| row.clone())
            .collect();
        let train_y: Vec<u8> = design
            .outcomes
            .iter()
            .zip(&in_test)
            .filter(|(_, &t)| !t)
            .map(|(&y, _)| y)
            .collect();
        let test_rows: Vec<Vec<Option<f64>>> = test_indices
            .iter()
            .map(|&i| design.rows[i].clone())
            .collect();
        let test_y: Vec<u8> = test_indices.iter().map(|&i| design.outcomes[i]).collect();

        let imputer = MedianImputer::fit(&train_rows, &design.columns)?;
        let train_filled = imputer.apply(&train_rows);
        let scaler = Standardizer::fit(&train_filled);
        let train_x = scaler.apply(&train_filled);
        let test_x = scaler.apply(&imputer.apply(&test_rows));

        let model = train_logistic(&train_x, &train_y, config)?;
        let scores = predict_proba(&model, &test_x);
        fold_auroc.push(auroc(&scores, &test_y)?);
        fold_f1.push(f1_binary(&scores, &test_y, F1_THRESHOLD)?);
        fold_models.push(FoldModel {
            test_indices: test_indices.clone(),
            medians: imputer.medians().to_vec(),
            means: scaler.means().to_vec(),
            scales: scaler.scales().to_vec(),
            weights: model.weights,
            intercept: model.intercept,
        });
    }

    let mean_auroc = fold_auroc.iter().sum::<f64>() / k as f64;
    let mean_f1 = fold_f1.iter().sum::<f64>() / k as f64;
    Ok(CvResult {
        fold_auroc,
        fold_f1,
        mean_auroc,
        mean_f1,
        fold_models,
    })
}
