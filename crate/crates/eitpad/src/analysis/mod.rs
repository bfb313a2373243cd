//! Signal conditioning and statistical evaluation: windowing, baselining,
//! grouping, normalization, similarity metrics, classification, and ROC
//! analysis.

mod classify;
mod roc;

pub use classify::{
    binary_fullness_eval, binary_fullness_eval_with_l2, evaluate_loo, evaluate_loo_with_l2,
    train_classifier, train_with_l2, BinaryEval, ClassifierModel, GroupAccuracy, LooReport,
    DEFAULT_L2,
};
pub use roc::{auc, roc_points, RocPoint};

use crate::error::{Error, Result};
use crate::frames::{FrameSeries, FrameVector};

/// Per-channel arithmetic mean over the most recent `ceil(window * rate)`
/// frames -- the denoising step applied before a reading is used.
pub fn window_mean(series: &FrameSeries, window_seconds: f64) -> Result<FrameVector> {
    if !(window_seconds > 0.0) || !window_seconds.is_finite() {
        return Err(Error::param(format!(
            "window must be positive and finite, got {window_seconds} s"
        )));
    }
    let want = (window_seconds * series.rate_hz()).ceil() as usize;
    let take = want.max(1).min(series.len());
    if take == 0 {
        return Err(Error::param("cannot average over an empty series"));
    }
    let start = series.len() - take;
    let mut acc = vec![0.0; series.width()];
    for i in start..series.len() {
        for (a, v) in acc.iter_mut().zip(series.frame(i).values()) {
            *a += v;
        }
    }
    for a in acc.iter_mut() {
        *a /= take as f64;
    }
    FrameVector::new(acc)
}

/// Difference each frame against the first: frame[i] - frame[0]. The first
/// output frame is identically zero; applying the operation twice changes
/// nothing more.
pub fn baseline_subtract(series: &FrameSeries) -> FrameSeries {
    let first = series.frame(0).clone();
    let frames: Vec<FrameVector> = (0..series.len())
        .map(|i| {
            let vals: Vec<f64> = series
                .frame(i)
                .values()
                .iter()
                .zip(first.values())
                .map(|(v, b)| v - b)
                .collect();
            FrameVector::new(vals).expect("finite differences of finite frames")
        })
        .collect();
    FrameSeries::new(frames, series.rate_hz()).expect("shape preserved")
}

/// Average consecutive frames in groups of `group_size`; the trailing
/// remainder (fewer than a full group) is dropped. The frame rate scales
/// down by the group size so timestamps keep their meaning.
pub fn group_average(series: &FrameSeries, group_size: usize) -> Result<FrameSeries> {
    if group_size == 0 {
        return Err(Error::param("group size must be at least 1"));
    }
    if group_size == 1 {
        return Ok(series.clone());
    }
    let n_out = series.len() / group_size;
    if n_out == 0 {
        return Err(Error::param(format!(
            "cannot form a group of {group_size} from {} frames",
            series.len()
        )));
    }
    let mut frames = Vec::with_capacity(n_out);
    for g in 0..n_out {
        let mut acc = vec![0.0; series.width()];
        for i in g * group_size..(g + 1) * group_size {
            for (a, v) in acc.iter_mut().zip(series.frame(i).values()) {
                *a += v;
            }
        }
        for a in acc.iter_mut() {
            *a /= group_size as f64;
        }
        frames.push(FrameVector::new(acc)?);
    }
    FrameSeries::new(frames, series.rate_hz() / group_size as f64)
}

/// Divide a scalar curve by its first value, so curves with different
/// absolute amplitudes become comparable. Errors when the first value is 0.
pub fn normalize_to_start(curve: &[f64]) -> Result<Vec<f64>> {
    let first = *curve
        .first()
        .ok_or_else(|| Error::param("cannot normalize an empty curve"))?;
    if first == 0.0 || !first.is_finite() {
        return Err(Error::Degenerate(format!(
            "curve starts at {first}; cannot normalize to it"
        )));
    }
    Ok(curve.iter().map(|v| v / first).collect())
}

/// Cosine of the angle between two equal-length vectors, clamped into
/// [-1, 1] against rounding.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate(
            "cosine similarity undefined for a zero vector".into(),
        ));
    }
    // sqrt(na*nb), not sqrt(na)*sqrt(nb): one rounding instead of two, so
    // identical inputs come out at exactly 1.0.
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation coefficient, clamped into [-1, 1] against rounding.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Degenerate(
            "pearson correlation undefined for a constant input".into(),
        ));
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "similarity needs equal non-empty lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite similarity input".into()));
    }
    Ok(())
}
