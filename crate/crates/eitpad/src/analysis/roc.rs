//! ROC curves and AUC from binary scores.
//!
//! The threshold set is the midpoints between consecutive distinct sorted
//! scores plus the two infinite endpoints, which traces the exact step
//! function of the empirical ROC. The AUC is the area under that step
//! function by trapezoidal integration; accumulating it in integers (two
//! units per win, one per tie, over positive/negative pairs) makes the
//! result *identical* to the Mann-Whitney pairwise statistic rather than
//! merely close to it.

use crate::error::{Error, Result};

/// One vertex of the empirical ROC step curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    /// Classify as positive when score >= threshold.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "need equal non-empty score/label lengths, got {} and {}",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Degenerate("non-finite score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate(
            "ROC needs at least one positive and one negative".into(),
        ));
    }
    Ok((pos, neg))
}

/// Scores sorted ascending with their labels, plus block boundaries of
/// distinct score values as (count_positive, count_negative, score) runs.
fn score_blocks(scores: &[f64], labels: &[bool]) -> Vec<(usize, usize, f64)> {
    let mut paired: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    paired.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut blocks: Vec<(usize, usize, f64)> = Vec::new();
    for (s, l) in paired {
        match blocks.last_mut() {
            Some(b) if b.2 == s => {
                if l {
                    b.0 += 1;
                } else {
                    b.1 += 1;
                }
            }
            _ => blocks.push(if l { (1, 0, s) } else { (0, 1, s) }),
        }
    }
    blocks
}

/// The empirical ROC, one vertex per threshold, thresholds ascending (so
/// the curve runs from (1, 1) down to (0, 0)).
pub fn roc_points(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = check_scores(scores, labels)?;
    let blocks = score_blocks(scores, labels);

    // Walking thresholds upward: below the lowest score everything is
    // positive; after passing a block its members flip to predicted
    // negative.
    let mut points = vec![RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    }];
    let mut tp = pos;
    let mut fp = neg;
    for (i, &(bp, bn, s)) in blocks.iter().enumerate() {
        tp -= bp;
        fp -= bn;
        let threshold = if i + 1 < blocks.len() {
            (s + blocks[i + 1].2) / 2.0
        } else {
            f64::INFINITY
        };
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(points)
}

/// Area under the empirical ROC. Exactly equal to the Mann-Whitney
/// statistic (wins + half-ties over all positive/negative pairs): both are
/// computed from the same integer pair counts.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_scores(scores, labels)?;
    let blocks = score_blocks(scores, labels);

    // For each block (ascending): its negatives are beaten by every
    // positive above the block (2 units each) and tie with the positives
    // inside it (1 unit each).
    let mut twice_area: u64 = 0;
    let mut pos_below: usize = 0;
    for &(bp, bn, _) in &blocks {
        let pos_above = pos - pos_below - bp;
        twice_area += bn as u64 * (2 * pos_above as u64 + bp as u64);
        pos_below += bp;
    }
    Ok(twice_area as f64 / (2 * pos as u64 * neg as u64) as f64)
}
