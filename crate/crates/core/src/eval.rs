//! Multinomial logistic regression over node embeddings.

use serde::{Deserialize, Serialize};

use crate::error::{FieError, Result};
use crate::matrix::DenseMatrix;

/// Node labels and disjoint train/val/test index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSplit {
    labels: Vec<i64>,
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

impl LabeledSplit {
    /// `labels[v] = −1` marks an unlabeled node.
    pub fn new(labels: Vec<i64>, train: Vec<usize>, val: Vec<usize>, test: Vec<usize>) -> Result<Self> {
        let n = labels.len();
        let mut owner = vec![None; n];
        for (name, set) in [("train", &train), ("val", &val), ("test", &test)] {
            for &v in set {
                if v >= n {
                    return Err(FieError::IndexOutOfRange {
                        what: "labeled nodes",
                        index: v,
                        len: n,
                    });
                }
                if let Some(other) = owner[v] {
                    return Err(FieError::invalid(format!("node {v} appears in both {other} and {name} splits")));
                }
                owner[v] = Some(name);
                if labels[v] < 0 {
                    return Err(FieError::invalid(format!("node {v} in the {name} split has no label")));
                }
            }
        }
        Ok(Self {
            labels,
            train,
            val,
            test,
        })
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn val(&self) -> &[usize] {
        &self.val
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    /// One more than the largest label.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize)
    }

    fn label(&self, v: usize) -> usize {
        self.labels[v] as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    Fixed(f64),
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub l2: f64,
    pub max_iters: usize,
    /// Stop once the gradient norm drops below this value.
    pub tol: f64,
    pub step: StepRule,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            max_iters: 1000,
            tol: 1e-6,
            step: StepRule::Backtracking,
        }
    }
}

/// Trained classifier: weights `(D+1) × C` with the bias in the last row,
/// applied to features standardized with train-split statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub weights: DenseMatrix,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    /// Objective value after every accepted step.
    pub loss_trace: Vec<f64>,
}

impl LogRegModel {
    pub fn num_classes(&self) -> usize {
        self.weights.cols()
    }

    /// Class logits for one raw (unstandardized) feature row.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let d = self.feature_mean.len();
        let mut z = self.weights.row(d).to_vec();
        for (k, &v) in x.iter().enumerate() {
            let s = (v - self.feature_mean[k]) / self.feature_std[k];
            if s != 0.0 {
                for (zc, w) in z.iter_mut().zip(self.weights.row(k)) {
                    *zc += s * w;
                }
            }
        }
        z
    }

    /// Argmax class; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.logits(x))
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean/std per column over `rows`; zero spread maps to 1.
fn standardization(x: &DenseMatrix, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let d = x.cols();
    let m = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for &i in rows {
        for (acc, v) in mean.iter_mut().zip(x.row(i)) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut var = vec![0.0; d];
    for &i in rows {
        for ((acc, v), mu) in var.iter_mut().zip(x.row(i)).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    let std = var
        .into_iter()
        .map(|v| {
            let s = (v / m).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

/// Regularized cross-entropy and its gradient for standardized features `x`
/// (m × D), class indices `y`, and weights `(D+1) × C` with the bias last.
/// The bias row is not penalized.
pub fn logreg_loss_and_grad(x: &DenseMatrix, y: &[usize], weights: &DenseMatrix, l2: f64) -> (f64, DenseMatrix) {
    let (m, d) = x.shape();
    let c = weights.cols();
    let mut grad = DenseMatrix::zeros(d + 1, c);
    let mut loss = 0.0;
    let mut z = vec![0.0; c];
    for i in 0..m {
        let row = x.row(i);
        z.copy_from_slice(weights.row(d));
        for (k, &v) in row.iter().enumerate() {
            if v != 0.0 {
                for (zc, w) in z.iter_mut().zip(weights.row(k)) {
                    *zc += v * w;
                }
            }
        }
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = z.iter().map(|v| (v - max).exp()).sum();
        let log_norm = max + total.ln();
        loss += log_norm - z[y[i]];
        // residual p − onehot
        for (cls, zc) in z.iter_mut().enumerate() {
            *zc = (*zc - log_norm).exp() - if cls == y[i] { 1.0 } else { 0.0 };
        }
        for (k, &v) in row.iter().enumerate() {
            if v != 0.0 {
                for (g, r) in grad.row_mut(k).iter_mut().zip(&z) {
                    *g += v * r;
                }
            }
        }
        for (g, r) in grad.row_mut(d).iter_mut().zip(&z) {
            *g += r;
        }
    }
    let inv_m = 1.0 / m as f64;
    loss *= inv_m;
    grad.map_inplace(|g| g * inv_m);
    let mut penalty = 0.0;
    for k in 0..d {
        let wrow = weights.row(k);
        penalty += wrow.iter().map(|w| w * w).sum::<f64>();
        for (g, w) in grad.row_mut(k).iter_mut().zip(wrow) {
            *g += l2 * w;
        }
    }
    (loss + 0.5 * l2 * penalty, grad)
}

fn norm_sq(m: &DenseMatrix) -> f64 {
    m.as_slice().iter().map(|v| v * v).sum()
}

fn axpy(w: &DenseMatrix, step: f64, g: &DenseMatrix) -> DenseMatrix {
    let mut out = w.clone();
    for (o, gv) in out.as_mut_slice().iter_mut().zip(g.as_slice()) {
        *o -= step * gv;
    }
    out
}

/// Full-batch gradient descent on the L2-regularized multinomial
/// cross-entropy of the train split. With [`StepRule::Backtracking`] each
/// step satisfies the Armijo condition, so the loss decreases monotonically.
pub fn train_logreg(embeddings: &DenseMatrix, split: &LabeledSplit, cfg: &LogRegConfig) -> Result<LogRegModel> {
    if split.train().is_empty() {
        return Err(FieError::invalid("the train split is empty"));
    }
    if embeddings.rows() != split.num_nodes() {
        return Err(FieError::DimensionMismatch {
            context: "embedding rows vs labels",
            expected: split.num_nodes(),
            actual: embeddings.rows(),
        });
    }
    if !(cfg.l2 >= 0.0) || cfg.max_iters == 0 || !(cfg.tol > 0.0) {
        return Err(FieError::invalid("logistic regression needs l2 >= 0, max_iters > 0, tol > 0"));
    }
    let (feature_mean, feature_std) = standardization(embeddings, split.train());
    let d = embeddings.cols();
    let mut x = embeddings.select_rows(split.train());
    for i in 0..x.rows() {
        for (k, v) in x.row_mut(i).iter_mut().enumerate() {
            *v = (*v - feature_mean[k]) / feature_std[k];
        }
    }
    let y: Vec<usize> = split.train().iter().map(|&v| split.label(v)).collect();
    let classes = split.num_classes().max(1);

    let mut weights = DenseMatrix::zeros(d + 1, classes);
    let (mut loss, mut grad) = logreg_loss_and_grad(&x, &y, &weights, cfg.l2);
    let mut loss_trace = vec![loss];
    let mut step = 1.0;
    for _ in 0..cfg.max_iters {
        if !loss.is_finite() {
            return Err(FieError::NonFinite("logistic loss"));
        }
        let g2 = norm_sq(&grad);
        if g2.sqrt() < cfg.tol {
            break;
        }
        let (next_w, next_loss, next_grad) = match cfg.step {
            StepRule::Fixed(lr) => {
                let w = axpy(&weights, lr, &grad);
                let (l, g) = logreg_loss_and_grad(&x, &y, &w, cfg.l2);
                (w, l, g)
            }
            StepRule::Backtracking => {
                let mut t = step * 2.0;
                loop {
                    let w = axpy(&weights, t, &grad);
                    let (l, g) = logreg_loss_and_grad(&x, &y, &w, cfg.l2);
                    if l <= loss - 1e-4 * t * g2 {
                        step = t;
                        break (w, l, g);
                    }
                    t *= 0.5;
                    if t < 1e-20 {
                        // no further decrease is representable
                        step = t;
                        break (weights.clone(), loss, grad.clone());
                    }
                }
            }
        };
        if step < 1e-20 && matches!(cfg.step, StepRule::Backtracking) {
            break;
        }
        weights = next_w;
        loss = next_loss;
        grad = next_grad;
        loss_trace.push(loss);
    }
    if !loss.is_finite() {
        return Err(FieError::NonFinite("logistic loss"));
    }
    Ok(LogRegModel {
        weights,
        feature_mean,
        feature_std,
        loss_trace,
    })
}

/// Accuracies per split plus per-class accuracy on the test split
/// (`None` for empty splits or classes absent from the test split).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub train_acc: Option<f64>,
    pub val_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub per_class: Vec<Option<f64>>,
}

fn accuracy(embeddings: &DenseMatrix, split: &LabeledSplit, model: &LogRegModel, nodes: &[usize]) -> Option<f64> {
    if nodes.is_empty() {
        return None;
    }
    let correct = nodes
        .iter()
        .filter(|&&v| model.predict(embeddings.row(v)) == split.label(v))
        .count();
    Some(correct as f64 / nodes.len() as f64)
}

pub fn evaluate(embeddings: &DenseMatrix, split: &LabeledSplit, model: &LogRegModel) -> Result<Metrics> {
    if embeddings.cols() != model.feature_mean.len() || embeddings.rows() != split.num_nodes() {
        return Err(FieError::DimensionMismatch {
            context: "embeddings vs classifier",
            expected: model.feature_mean.len(),
            actual: embeddings.cols(),
        });
    }
    let classes = model.num_classes();
    let mut hits = vec![0usize; classes];
    let mut totals = vec![0usize; classes];
    for &v in split.test() {
        let y = split.label(v);
        if y >= classes {
            continue;
        }
        totals[y] += 1;
        if model.predict(embeddings.row(v)) == y {
            hits[y] += 1;
        }
    }
    Ok(Metrics {
        train_acc: accuracy(embeddings, split, model, split.train()),
        val_acc: accuracy(embeddings, split, model, split.val()),
        test_acc: accuracy(embeddings, split, model, split.test()),
        per_class: hits
            .iter()
            .zip(&totals)
            .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
            .collect(),
    })
}
