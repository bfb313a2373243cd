//! Multinomial logistic regression over channel features, with the grouped
//! cross-validation schemes used in the robustness study.
//!
//! Training is deliberately plain: standardize features with
//! training-split statistics, start from zero weights, and run full-batch
//! gradient descent with Armijo backtracking on the L2-penalised mean
//! negative log-likelihood until the gradient norm drops below 1e-6 or
//! 10,000 iterations pass. No randomness anywhere, so a dataset maps to
//! exactly one model.

use super::roc::{auc, roc_points, RocPoint};
use crate::error::{Error, Result};
use crate::perturb::{DatasetRow, LabeledDataset};
use nalgebra::{DMatrix, DVector};

/// Default L2 penalty weight on the class weight vectors (biases are not
/// penalised).
pub const DEFAULT_L2: f64 = 1e-3;

const GRAD_TOL: f64 = 1e-6;
const MAX_ITERS: usize = 10_000;

/// Linear softmax classifier over standardized channel features.
#[derive(Clone, Debug)]
pub struct ClassifierModel {
    /// Ascending class labels (volumes, mL).
    classes: Vec<f64>,
    /// Per-feature standardization from the training split.
    means: Vec<f64>,
    sds: Vec<f64>,
    /// One weight row per class.
    weights: DMatrix<f64>,
    biases: DVector<f64>,
    iterations: usize,
    converged: bool,
}

impl ClassifierModel {
    pub fn classes(&self) -> &[f64] {
        &self.classes
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    fn standardize(&self, features: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            features.len(),
            features
                .iter()
                .zip(self.means.iter().zip(&self.sds))
                .map(|(x, (m, s))| (x - m) / s),
        )
    }

    /// Per-class probabilities for one feature vector.
    pub fn probabilities(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.means.len() {
            return Err(Error::DimensionMismatch(format!(
                "feature vector has {} channels, model expects {}",
                features.len(),
                self.means.len()
            )));
        }
        let x = self.standardize(features);
        let mut logits = &self.weights * x + &self.biases;
        let peak = logits.max();
        for v in logits.iter_mut() {
            *v = (*v - peak).exp();
        }
        let total: f64 = logits.iter().sum();
        Ok(logits.iter().map(|v| v / total).collect())
    }

    /// Most probable class label; ties resolve toward the lower label.
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        let p = self.probabilities(features)?;
        let mut best = 0;
        for (i, v) in p.iter().enumerate() {
            if *v > p[best] {
                best = i;
            }
        }
        Ok(self.classes[best])
    }
}

/// Mean negative log-likelihood plus L2 penalty, and its gradient, at the
/// given parameters. `x` is standardized samples (rows), `y` class indices.
fn loss_and_grad(
    x: &DMatrix<f64>,
    y: &[usize],
    w: &DMatrix<f64>,
    b: &DVector<f64>,
    l2: f64,
) -> (f64, DMatrix<f64>, DVector<f64>) {
    let n = x.nrows();
    let k = w.nrows();
    let mut loss = 0.0;
    let mut gw = DMatrix::zeros(k, x.ncols());
    let mut gb = DVector::zeros(k);
    for i in 0..n {
        let xi = x.row(i).transpose();
        let mut logits = w * &xi + b;
        let peak = logits.max();
        let mut denom = 0.0;
        for v in logits.iter_mut() {
            *v -= peak;
            denom += v.exp();
        }
        loss -= logits[y[i]] - denom.ln();
        for c in 0..k {
            let p = logits[c].exp() / denom;
            let err = p - if c == y[i] { 1.0 } else { 0.0 };
            gb[c] += err;
            for (g, xv) in gw.row_mut(c).iter_mut().zip(xi.iter()) {
                *g += err * xv;
            }
        }
    }
    loss /= n as f64;
    gw /= n as f64;
    gb /= n as f64;
    loss += 0.5 * l2 * w.norm_squared();
    gw += l2 * w;
    (loss, gw, gb)
}

/// Fit a softmax model on every row whose group (perturbation degree k)
/// differs from `held_out_group`; pass `None` to train on everything.
pub fn train_classifier(
    dataset: &LabeledDataset,
    held_out_group: Option<usize>,
) -> Result<ClassifierModel> {
    train_with_l2(dataset, held_out_group, DEFAULT_L2)
}

/// [`train_classifier`] with an explicit L2 penalty weight.
pub fn train_with_l2(
    dataset: &LabeledDataset,
    held_out_group: Option<usize>,
    l2: f64,
) -> Result<ClassifierModel> {
    if !(l2 >= 0.0) || !l2.is_finite() {
        return Err(Error::param(format!("L2 weight must be >= 0, got {l2}")));
    }
    let rows: Vec<&DatasetRow> = dataset
        .rows()
        .iter()
        .filter(|r| held_out_group != Some(r.k))
        .collect();
    if rows.is_empty() {
        return Err(Error::param("no training rows left after holding out"));
    }
    let mut classes: Vec<f64> = rows.iter().map(|r| r.label_ml).collect();
    classes.sort_by(f64::total_cmp);
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Degenerate(
            "training split holds a single class".into(),
        ));
    }
    let d = dataset.channels();
    let n = rows.len();

    // Standardization statistics from the training split only.
    let mut means = vec![0.0; d];
    for r in &rows {
        for (m, v) in means.iter_mut().zip(&r.features) {
            *m += v;
        }
    }
    for m in means.iter_mut() {
        *m /= n as f64;
    }
    let mut sds = vec![0.0; d];
    for r in &rows {
        for (s, (v, m)) in sds.iter_mut().zip(r.features.iter().zip(&means)) {
            *s += (v - m) * (v - m);
        }
    }
    for s in sds.iter_mut() {
        *s = (*s / n as f64).sqrt();
        if *s == 0.0 {
            // Constant channel: carries no information; shift to zero and
            // leave it there rather than dividing by zero.
            *s = 1.0;
        }
    }

    let x = DMatrix::from_fn(n, d, |i, j| (rows[i].features[j] - means[j]) / sds[j]);
    let y: Vec<usize> = rows
        .iter()
        .map(|r| {
            classes
                .iter()
                .position(|c| *c == r.label_ml)
                .expect("label present in class list")
        })
        .collect();

    let k = classes.len();
    let mut w = DMatrix::zeros(k, d);
    let mut b = DVector::zeros(k);
    let (mut loss, mut gw, mut gb) = loss_and_grad(&x, &y, &w, &b, l2);
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERS {
        let gnorm2 = gw.norm_squared() + gb.norm_squared();
        if gnorm2.sqrt() < GRAD_TOL {
            converged = true;
            break;
        }
        // Armijo backtracking along the negative gradient.
        let mut accepted = false;
        for _ in 0..60 {
            let wt = &w - &gw * step;
            let bt = &b - &gb * step;
            let (lt, gwt, gbt) = loss_and_grad(&x, &y, &wt, &bt, l2);
            if lt <= loss - 1e-4 * step * gnorm2 {
                w = wt;
                b = bt;
                loss = lt;
                gw = gwt;
                gb = gbt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // Step shrank to nothing: numerically at a minimum.
            converged = true;
            break;
        }
        // Let the step recover so convergence stays linear.
        step = (step * 2.0).min(1e6);
    }

    Ok(ClassifierModel {
        classes,
        means,
        sds,
        weights: w,
        biases: b,
        iterations,
        converged,
    })
}

/// Accuracy of one held-out group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupAccuracy {
    pub group: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
}

/// Leave-one-group-out evaluation table.
#[derive(Clone, Debug)]
pub struct LooReport {
    pub groups: Vec<GroupAccuracy>,
    pub mean_accuracy: f64,
}

/// Leave-one-group-out evaluation restricted to the volume classes in
/// `division`: for each perturbation degree k present, train on all other
/// degrees and test on k.
pub fn evaluate_loo(dataset: &LabeledDataset, division: &[f64]) -> Result<LooReport> {
    evaluate_loo_with_l2(dataset, division, DEFAULT_L2)
}

/// [`evaluate_loo`] with an explicit L2 penalty weight.
pub fn evaluate_loo_with_l2(
    dataset: &LabeledDataset,
    division: &[f64],
    l2: f64,
) -> Result<LooReport> {
    let subset = dataset.filtered(|r| division.iter().any(|v| *v == r.label_ml));
    if subset.is_empty() {
        return Err(Error::param(
            "no rows match the requested class division",
        ));
    }
    let groups = subset.k_levels();
    if groups.len() < 2 {
        return Err(Error::param(
            "leave-one-group-out needs at least two groups",
        ));
    }
    let mut out = Vec::with_capacity(groups.len());
    for &g in &groups {
        let model = train_with_l2(&subset, Some(g), l2)?;
        let mut n_test = 0usize;
        let mut correct = 0usize;
        for row in subset.rows().iter().filter(|r| r.k == g) {
            n_test += 1;
            if model.predict(&row.features)? == row.label_ml {
                correct += 1;
            }
        }
        out.push(GroupAccuracy {
            group: g,
            n_train: subset.len() - n_test,
            n_test,
            accuracy: correct as f64 / n_test as f64,
        });
    }
    let mean_accuracy = out.iter().map(|g| g.accuracy).sum::<f64>() / out.len() as f64;
    Ok(LooReport {
        groups: out,
        mean_accuracy,
    })
}

/// Binary full-vs-empty detection quality.
#[derive(Clone, Debug)]
pub struct BinaryEval {
    pub auc: f64,
    /// Accuracy of "positive when P(full) >= 0.5" on the pooled out-of-fold
    /// scores.
    pub accuracy: f64,
    pub roc: Vec<RocPoint>,
    pub n_positive: usize,
    pub n_negative: usize,
}

/// Two-class fullness detection: rows at or below `v_low` are negative,
/// rows at or above `v_high` positive, anything between is dropped. Scores
/// are pooled across leave-one-group-out folds (train on all other
/// perturbation degrees, score the held-out one), then swept into a ROC.
pub fn binary_fullness_eval(
    dataset: &LabeledDataset,
    v_low: f64,
    v_high: f64,
) -> Result<BinaryEval> {
    binary_fullness_eval_with_l2(dataset, v_low, v_high, DEFAULT_L2)
}

/// [`binary_fullness_eval`] with an explicit L2 penalty weight.
pub fn binary_fullness_eval_with_l2(
    dataset: &LabeledDataset,
    v_low: f64,
    v_high: f64,
    l2: f64,
) -> Result<BinaryEval> {
    if !(v_low < v_high) {
        return Err(Error::param(format!(
            "thresholds must satisfy v_low < v_high, got {v_low} and {v_high}"
        )));
    }
    // Relabel to a two-class dataset: 0 = empty side, 1 = full side.
    let rows: Vec<DatasetRow> = dataset
        .rows()
        .iter()
        .filter(|r| r.label_ml <= v_low || r.label_ml >= v_high)
        .map(|r| DatasetRow {
            label_ml: if r.label_ml >= v_high { 1.0 } else { 0.0 },
            ..r.clone()
        })
        .collect();
    let binary = LabeledDataset::new(dataset.channels(), rows)?;
    let n_positive = binary.rows().iter().filter(|r| r.label_ml == 1.0).count();
    let n_negative = binary.len() - n_positive;
    if n_positive == 0 || n_negative == 0 {
        return Err(Error::Degenerate(
            "both fullness classes must survive the thresholds".into(),
        ));
    }
    let groups = binary.k_levels();
    if groups.len() < 2 {
        return Err(Error::param(
            "binary evaluation needs at least two perturbation groups",
        ));
    }

    let mut scores = Vec::with_capacity(binary.len());
    let mut labels = Vec::with_capacity(binary.len());
    let mut correct = 0usize;
    for &g in &groups {
        let model = train_with_l2(&binary, Some(g), l2)?;
        let full_idx = model
            .classes()
            .iter()
            .position(|c| *c == 1.0)
            .expect("positive class trained");
        for row in binary.rows().iter().filter(|r| r.k == g) {
            let p_full = model.probabilities(&row.features)?[full_idx];
            let is_full = row.label_ml == 1.0;
            scores.push(p_full);
            labels.push(is_full);
            if (p_full >= 0.5) == is_full {
                correct += 1;
            }
        }
    }
    Ok(BinaryEval {
        auc: auc(&scores, &labels)?,
        accuracy: correct as f64 / scores.len() as f64,
        roc: roc_points(&scores, &labels)?,
        n_positive,
        n_negative,
    })
}
