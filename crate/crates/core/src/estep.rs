//! Posterior responsibilities over true classes.
//!
//! Scores are accumulated as sums of log confusion entries and normalized
//! with a single max-shift per item, so items with hundreds of votes do not
//! underflow.

use rayon::prelude::*;

use crate::model::{ConfusionTensor, Cube, LabelSet, PosteriorMatrix, Vote};

/// `log Σ exp(x)` with a max-shift. Returns `-inf` for an empty slice or all `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Unnormalized log scores `Σ_votes log c(i, l, g)` for each class `l`.
///
/// `log_c(worker, truth, label)` supplies the log confusion entry.
pub(crate) fn log_scores<F>(classes: usize, votes: &[Vote], log_c: F, scores: &mut [f64])
where
    F: Fn(usize, usize, usize) -> f64,
{
    debug_assert_eq!(scores.len(), classes);
    scores.iter_mut().for_each(|s| *s = 0.0);
    for vote in votes {
        for (l, s) in scores.iter_mut().enumerate() {
            *s += log_c(vote.worker, l, vote.class);
        }
    }
}

/// Turns log scores into probabilities in place.
///
/// If every class scores `-inf` (possible only with an unsmoothed boundary
/// tensor) the row falls back to uniform.
pub(crate) fn normalize_scores(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        let u = 1.0 / scores.len() as f64;
        scores.iter_mut().for_each(|s| *s = u);
        return;
    }
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        total += *s;
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
}

/// Elementwise natural log of a confusion tensor.
pub(crate) fn log_cube(confusion: &Cube) -> Cube {
    let data = confusion.as_slice().iter().map(|v| v.ln()).collect();
    Cube::from_vec(confusion.workers(), confusion.classes(), data).expect("same shape")
}

/// `P(y = l | c, votes)` for one item. Empty `votes` gives the uniform vector.
pub fn posterior(confusion: &ConfusionTensor, votes: &[Vote]) -> Vec<f64> {
    let mut p = vec![0.0; confusion.classes()];
    log_scores(confusion.classes(), votes, |i, l, g| confusion.get(i, l, g).ln(), &mut p);
    normalize_scores(&mut p);
    p
}

/// Posterior for every item of `labels`. Rows are computed independently.
pub fn posterior_all(confusion: &ConfusionTensor, labels: &LabelSet) -> PosteriorMatrix {
    posterior_all_cube(confusion.cube(), labels)
}

pub(crate) fn posterior_all_cube(confusion: &Cube, labels: &LabelSet) -> PosteriorMatrix {
    let k = confusion.classes();
    let logs = log_cube(confusion);
    let mut data = vec![0.0; labels.num_items() * k];
    data.par_chunks_mut(k).enumerate().for_each(|(j, row)| {
        log_scores(k, labels.votes(j), |i, l, g| logs.get(i, l, g), row);
        normalize_scores(row);
    });
    PosteriorMatrix::from_flat(k, data)
}

/// Per-sample statistic: `a(i, l, g) = P(y = l | c, votes) · 1(worker i answered g)`.
pub fn sample_stat(confusion: &ConfusionTensor, votes: &[Vote]) -> Cube {
    let p = posterior(confusion, votes);
    let mut a = Cube::zeros(confusion.workers(), confusion.classes());
    for vote in votes {
        for (l, &pl) in p.iter().enumerate() {
            a.set(vote.worker, l, vote.class, pl);
        }
    }
    a
}
