//! L2-penalized logistic regression on sparse scaled bigram counts.
//!
//! The cost is the mean negative log-likelihood plus a ridge penalty. The
//! primary penalty is the squared norm λ‖ψ‖₂², differentiable everywhere;
//! the literal norm form λ‖ψ‖₂ is available behind [`PenaltyForm::Norm`].
//! The intercept, when fitted, is never penalized. Training is full-batch
//! L-BFGS from a zero start, so results are deterministic.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSelector, FeatureVector};
use crate::math::{ln1p_exp, sigmoid};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PenaltyForm {
    /// λ‖ψ‖₂² — ridge as implemented.
    #[default]
    SquaredNorm,
    /// λ‖ψ‖₂ — the unsquared norm, exposed for sensitivity checks.
    Norm,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lambda: f64,
    pub penalty: PenaltyForm,
    pub fit_intercept: bool,
    /// Convergence threshold on the gradient L2 norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 2.0,
            penalty: PenaltyForm::SquaredNorm,
            fit_intercept: true,
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Coefficients over the selected features.
    pub psi: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub penalty: PenaltyForm,
    /// Training sample size M*.
    pub train_size: usize,
    pub selector_hash: u64,
    pub converged: bool,
}

impl LogisticModel {
    pub fn k(&self) -> usize {
        self.psi.len()
    }

    pub fn psi_norm(&self) -> f64 {
        self.psi.iter().map(|p| p * p).sum::<f64>().sqrt()
    }
}

fn check_finite(x: &[FeatureVector]) -> Result<()> {
    for (row, v) in x.iter().enumerate() {
        if v.entries.iter().any(|&(_, val)| !val.is_finite()) {
            return Err(Error::computation(format!("non-finite feature value in row {row}")));
        }
    }
    Ok(())
}

/// Cost J(ψ) and its exact gradient for the configured penalty form.
///
/// Returns (J, ∂J/∂ψ, ∂J/∂intercept). Summation order over samples is fixed,
/// so repeated evaluation is bitwise reproducible.
pub fn loss_and_gradient(
    psi: &[f64],
    intercept: f64,
    x: &[FeatureVector],
    y: &[bool],
    lambda: f64,
    penalty: PenaltyForm,
) -> Result<(f64, Vec<f64>, f64)> {
    if x.len() != y.len() {
        return Err(Error::validation("x and y must have equal length"));
    }
    if x.is_empty() {
        return Err(Error::validation("empty sample"));
    }
    check_finite(x)?;
    Ok(loss_and_gradient_unchecked(psi, intercept, x, y, lambda, penalty))
}

fn loss_and_gradient_unchecked(
    psi: &[f64],
    intercept: f64,
    x: &[FeatureVector],
    y: &[bool],
    lambda: f64,
    penalty: PenaltyForm,
) -> (f64, Vec<f64>, f64) {
    let m = x.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; psi.len()];
    let mut grad_b = 0.0;
    for (v, &yi) in x.iter().zip(y) {
        let z = intercept + v.dot(psi);
        let target = if yi { 1.0 } else { 0.0 };
        loss += ln1p_exp(z) - target * z;
        let resid = sigmoid(z) - target;
        for &(i, val) in &v.entries {
            grad[i as usize] += resid * val;
        }
        grad_b += resid;
    }
    loss /= m;
    grad_b /= m;
    for g in grad.iter_mut() {
        *g /= m;
    }
    match penalty {
        PenaltyForm::SquaredNorm => {
            let norm_sq: f64 = psi.iter().map(|p| p * p).sum();
            loss += lambda * norm_sq;
            for (g, p) in grad.iter_mut().zip(psi) {
                *g += 2.0 * lambda * p;
            }
        }
        PenaltyForm::Norm => {
            let norm: f64 = psi.iter().map(|p| p * p).sum::<f64>().sqrt();
            loss += lambda * norm;
            if norm > 0.0 {
                for (g, p) in grad.iter_mut().zip(psi) {
                    *g += lambda * p / norm;
                }
            }
        }
    }
    (loss, grad, grad_b)
}

/// Train by full-batch L-BFGS from ψ = 0 until the gradient norm falls below
/// `tol` or `max_iter` iterations pass. Non-convergence is reported through
/// the model's `converged` flag, not an error.
pub fn train(x: &[FeatureVector], y: &[bool], k: usize, config: &TrainConfig) -> Result<LogisticModel> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::validation("training sample empty or misaligned"));
    }
    if config.lambda < 0.0 {
        return Err(Error::validation("lambda must be nonnegative"));
    }
    let n_pos = y.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == y.len() {
        return Err(Error::validation("training requires both classes present"));
    }
    check_finite(x)?;
    for v in x {
        if v.entries.iter().any(|&(i, _)| i as usize >= k) {
            return Err(Error::validation("feature index out of range"));
        }
    }
    let selector_hash = x.first().map(|v| v.selector_hash).unwrap_or(0);

    let dim = if config.fit_intercept { k + 1 } else { k };
    let eval = |theta: &[f64]| -> (f64, Vec<f64>) {
        let (psi, b) = if config.fit_intercept {
            (&theta[..k], theta[k])
        } else {
            (theta, 0.0)
        };
        let (loss, grad_psi, grad_b) =
            loss_and_gradient_unchecked(psi, b, x, y, config.lambda, config.penalty);
        let mut grad = grad_psi;
        if config.fit_intercept {
            grad.push(grad_b);
        }
        (loss, grad)
    };

    let mut theta = vec![0.0; dim];
    let (mut loss, mut grad) = eval(&theta);
    let mut converged = norm(&grad) <= config.tol;

    // L-BFGS history.
    const MEMORY: usize = 10;
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();

    let mut iter = 0;
    while !converged && iter < config.max_iter {
        iter += 1;
        let direction = lbfgs_direction(&grad, &s_hist, &y_hist, &rho_hist);
        let dir_dot_grad: f64 = direction.iter().zip(&grad).map(|(d, g)| d * g).sum();
        // Fall back to steepest descent if the approximation lost descent.
        let (direction, dir_dot_grad) = if dir_dot_grad < 0.0 {
            (direction, dir_dot_grad)
        } else {
            let d: Vec<f64> = grad.iter().map(|g| -g).collect();
            let dd = -grad.iter().map(|g| g * g).sum::<f64>();
            (d, dd)
        };

        // Backtracking Armijo line search.
        let mut step = 1.0;
        let mut accepted = false;
        let mut new_theta = theta.clone();
        let mut new_loss = loss;
        let mut new_grad = grad.clone();
        for _ in 0..60 {
            for (t, (old, d)) in new_theta.iter_mut().zip(theta.iter().zip(&direction)) {
                *t = old + step * d;
            }
            let (l, g) = eval(&new_theta);
            if l <= loss + 1e-4 * step * dir_dot_grad {
                new_loss = l;
                new_grad = g;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break; // line search stalled at numerical precision
        }

        let s: Vec<f64> = new_theta.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        if sy > 1e-12 * norm(&s) * norm(&yv) {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / sy);
            s_hist.push(s);
            y_hist.push(yv);
        }
        theta = new_theta;
        loss = new_loss;
        grad = new_grad;
        converged = norm(&grad) <= config.tol;
    }

    let (psi, intercept) = if config.fit_intercept {
        (theta[..k].to_vec(), theta[k])
    } else {
        (theta, 0.0)
    };
    Ok(LogisticModel {
        psi,
        intercept,
        lambda: config.lambda,
        penalty: config.penalty,
        train_size: x.len(),
        selector_hash,
        converged,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn lbfgs_direction(
    grad: &[f64],
    s_hist: &[Vec<f64>],
    y_hist: &[Vec<f64>],
    rho_hist: &[f64],
) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let m = s_hist.len();
    let mut alpha = vec![0.0; m];
    for i in (0..m).rev() {
        alpha[i] = rho_hist[i] * s_hist[i].iter().zip(&q).map(|(s, q)| s * q).sum::<f64>();
        for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
            *qj -= alpha[i] * yj;
        }
    }
    if m > 0 {
        let last = m - 1;
        let yy: f64 = y_hist[last].iter().map(|y| y * y).sum();
        let gamma = if yy > 0.0 { 1.0 / (rho_hist[last] * yy) } else { 1.0 };
        for qj in q.iter_mut() {
            *qj *= gamma;
        }
    }
    for i in 0..m {
        let beta = rho_hist[i] * y_hist[i].iter().zip(&q).map(|(y, q)| y * q).sum::<f64>();
        for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
            *qj += (alpha[i] - beta) * sj;
        }
    }
    q.iter_mut().for_each(|x| *x = -*x);
    q
}

/// Predicted probability that the snippet is FNC-like, strictly inside (0,1).
pub fn predict_proba(model: &LogisticModel, x: &FeatureVector) -> Result<f64> {
    if x.selector_hash != model.selector_hash {
        return Err(Error::SelectorMismatch { expected: model.selector_hash, got: x.selector_hash });
    }
    Ok(predict_unchecked(model, x))
}

pub(crate) fn predict_unchecked(model: &LogisticModel, x: &FeatureVector) -> f64 {
    sigmoid(model.intercept + x.dot(&model.psi)).clamp(1e-12, 1.0 - 1e-12)
}

/// Cross-validation outcome: the winning penalty and the per-λ mean accuracy.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub best_lambda: f64,
    /// (λ, mean fold accuracy), in grid order.
    pub mean_accuracy: Vec<(f64, f64)>,
    /// Per-λ fold accuracies, aligned with `mean_accuracy`.
    pub fold_accuracies: Vec<Vec<f64>>,
}

/// Stratified k-fold grid search over λ. Ties go to the smaller penalty.
pub fn cross_validate(
    x: &[FeatureVector],
    y: &[bool],
    k: usize,
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
    base: &TrainConfig,
) -> Result<CvResult> {
    if folds < 2 {
        return Err(Error::validation("folds must be at least 2"));
    }
    if lambda_grid.is_empty() {
        return Err(Error::validation("lambda grid must be nonempty"));
    }
    // Stratified fold assignment: shuffle each class, deal round-robin.
    use rand::seq::SliceRandom;
    let mut rng = rng::stream(seed, "cv_folds");
    let mut fold_of = vec![0usize; x.len()];
    for class in [true, false] {
        let mut idx: Vec<usize> =
            (0..x.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            fold_of[i] = pos % folds;
        }
    }
    for f in 0..folds {
        let test_pos = (0..x.len()).filter(|&i| fold_of[i] == f && y[i]).count();
        let test_neg = (0..x.len()).filter(|&i| fold_of[i] == f && !y[i]).count();
        if test_pos == 0 || test_neg == 0 {
            return Err(Error::validation(format!("fold {f} lacks one of the classes")));
        }
    }

    let mut mean_accuracy = Vec::with_capacity(lambda_grid.len());
    let mut fold_accuracies = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let mut accs = Vec::with_capacity(folds);
        for f in 0..folds {
            let mut train_x = Vec::new();
            let mut train_y = Vec::new();
            let mut test_x = Vec::new();
            let mut test_y = Vec::new();
            for i in 0..x.len() {
                if fold_of[i] == f {
                    test_x.push(x[i].clone());
                    test_y.push(y[i]);
                } else {
                    train_x.push(x[i].clone());
                    train_y.push(y[i]);
                }
            }
            let config = TrainConfig { lambda, ..base.clone() };
            let model = train(&train_x, &train_y, k, &config)?;
            let correct = test_x
                .iter()
                .zip(&test_y)
                .filter(|(v, &label)| (predict_unchecked(&model, v) > 0.5) == label)
                .count();
            accs.push(correct as f64 / test_y.len() as f64);
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        mean_accuracy.push((lambda, mean));
        fold_accuracies.push(accs);
    }

    let mut best = mean_accuracy[0];
    for &(lambda, acc) in &mean_accuracy[1..] {
        if acc > best.1 || (acc == best.1 && lambda < best.0) {
            best = (lambda, acc);
        }
    }
    Ok(CvResult { best_lambda: best.0, mean_accuracy, fold_accuracies })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    /// None for empty bins.
    pub mean_prediction: Option<f64>,
    pub empirical_rate: Option<f64>,
    pub count: u64,
}

/// Test-set evaluation: accuracy at threshold 0.5, the 2×2 confusion matrix
/// (rows = actual CNN/FNC, columns = predicted CNN/FNC), and a 20-bin
/// calibration curve at 5% increments. Empty bins carry count 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Filled by cross-validation when available.
    pub fold_accuracies: Vec<f64>,
    pub confusion: [[u64; 2]; 2],
    pub calibration: Vec<CalibrationBin>,
}

pub fn evaluate(model: &LogisticModel, x_test: &[FeatureVector], y_test: &[bool]) -> Result<EvalReport> {
    if x_test.is_empty() || x_test.len() != y_test.len() {
        return Err(Error::validation("test set empty or misaligned"));
    }
    let mut confusion = [[0u64; 2]; 2];
    let mut bin_pred_sum = [0.0f64; 20];
    let mut bin_pos = [0u64; 20];
    let mut bin_count = [0u64; 20];
    let mut correct = 0usize;
    for (v, &label) in x_test.iter().zip(y_test) {
        let p = predict_proba(model, v)?;
        let predicted = p > 0.5;
        if predicted == label {
            correct += 1;
        }
        confusion[label as usize][predicted as usize] += 1;
        let bin = ((p / 0.05) as usize).min(19);
        bin_pred_sum[bin] += p;
        bin_count[bin] += 1;
        if label {
            bin_pos[bin] += 1;
        }
    }
    let calibration = (0..20)
        .map(|b| CalibrationBin {
            lo: b as f64 * 0.05,
            hi: (b + 1) as f64 * 0.05,
            mean_prediction: (bin_count[b] > 0).then(|| bin_pred_sum[b] / bin_count[b] as f64),
            empirical_rate: (bin_count[b] > 0).then(|| bin_pos[b] as f64 / bin_count[b] as f64),
            count: bin_count[b],
        })
        .collect();
    Ok(EvalReport {
        accuracy: correct as f64 / y_test.len() as f64,
        fold_accuracies: Vec::new(),
        confusion,
        calibration,
    })
}

/// The strongest positive (FNC-flavored) and negative (CNN-flavored)
/// coefficients, each sorted by |ψ| descending.
pub fn top_coefficients<'a>(
    model: &LogisticModel,
    selector: &'a FeatureSelector,
    n: usize,
) -> (Vec<(&'a str, f64)>, Vec<(&'a str, f64)>) {
    let mut pairs: Vec<(&str, f64)> = selector
        .selected()
        .iter()
        .map(String::as_str)
        .zip(model.psi.iter().copied())
        .collect();
    pairs.sort_by(|a, b| b.1.abs().partial_cmp(&a.1.abs()).unwrap().then(a.0.cmp(b.0)));
    let positive: Vec<_> = pairs.iter().filter(|&&(_, p)| p > 0.0).take(n).copied().collect();
    let negative: Vec<_> = pairs.iter().filter(|&&(_, p)| p < 0.0).take(n).copied().collect();
    (positive, negative)
}

/// Model file: hash-comment header plus one `bigram<TAB>psi` line per feature.
pub fn write_model(path: &Path, model: &LogisticModel, selector: &FeatureSelector) -> Result<()> {
    if selector.k() != model.k() {
        return Err(Error::validation("selector and model dimensions differ"));
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "# k={}", model.k()).map_err(|e| Error::io(path, e))?;
    writeln!(f, "# lambda={}", model.lambda).map_err(|e| Error::io(path, e))?;
    writeln!(f, "# penalty={}", match model.penalty {
        PenaltyForm::SquaredNorm => "squared_norm",
        PenaltyForm::Norm => "norm",
    })
    .map_err(|e| Error::io(path, e))?;
    writeln!(f, "# intercept={}", model.intercept).map_err(|e| Error::io(path, e))?;
    writeln!(f, "# selector_hash={:016x}", model.selector_hash).map_err(|e| Error::io(path, e))?;
    writeln!(f, "# train_size={}", model.train_size).map_err(|e| Error::io(path, e))?;
    writeln!(f, "# converged={}", model.converged).map_err(|e| Error::io(path, e))?;
    for (bigram, psi) in selector.selected().iter().zip(&model.psi) {
        writeln!(f, "{bigram}\t{psi}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_model(path: &Path) -> Result<(LogisticModel, Vec<String>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut header: HashMap<String, String> = HashMap::new();
    let mut bigrams = Vec::new();
    let mut psi = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some((key, value)) = rest.split_once('=') {
                header.insert(key.to_string(), value.to_string());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (bigram, value) = line
            .split_once('\t')
            .ok_or_else(|| Error::validation(format!("{}: bad model line", path.display())))?;
        bigrams.push(bigram.to_string());
        psi.push(value.parse::<f64>().map_err(|_| {
            Error::validation(format!("{}: bad coefficient {value:?}", path.display()))
        })?);
    }
    let get = |key: &str| -> Result<&String> {
        header.get(key).ok_or_else(|| {
            Error::validation(format!("{}: missing header field {key}", path.display()))
        })
    };
    let model = LogisticModel {
        psi,
        intercept: get("intercept")?.parse().map_err(|_| Error::validation("bad intercept"))?,
        lambda: get("lambda")?.parse().map_err(|_| Error::validation("bad lambda"))?,
        penalty: match get("penalty")?.as_str() {
            "squared_norm" => PenaltyForm::SquaredNorm,
            "norm" => PenaltyForm::Norm,
            other => return Err(Error::validation(format!("unknown penalty {other:?}"))),
        },
        train_size: get("train_size")?.parse().map_err(|_| Error::validation("bad train_size"))?,
        selector_hash: u64::from_str_radix(get("selector_hash")?, 16)
            .map_err(|_| Error::validation("bad selector_hash"))?,
        converged: get("converged")?.parse().map_err(|_| Error::validation("bad converged"))?,
    };
    Ok((model, bigrams))
}
