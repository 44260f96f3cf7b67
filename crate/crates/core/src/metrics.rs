//! Evaluation: error rate, marginal log-likelihood, the fixed-point drift of
//! the sufficient statistics, and a finite-difference stationarity check.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estep::{log_cube, log_scores, log_sum_exp, posterior_all_cube};
use crate::model::{ConfusionTensor, Cube, GroundTruth, LabelSet};
use crate::online::normalize_cube;

/// Percentage of items in `truth` whose prediction differs from the true class.
pub fn error_rate(predicted: &[usize], truth: &GroundTruth) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::InvalidParameter("ground truth is empty".into()));
    }
    let mut wrong = 0usize;
    for (item, class) in truth.iter() {
        let guess = predicted.get(item).ok_or_else(|| {
            Error::InvalidParameter(format!("no prediction for item index {item}"))
        })?;
        if *guess != class {
            wrong += 1;
        }
    }
    Ok(100.0 * wrong as f64 / truth.len() as f64)
}

/// Two decimals, halves rounded up.
pub fn format_error_rate(rate: f64) -> String {
    format!("{:.2}", (rate * 100.0).round() / 100.0)
}

/// Per-item log-likelihood terms `log Σ_l exp(Σ log c(i, l, g))`.
fn item_terms(logs: &Cube, labels: &LabelSet) -> Vec<f64> {
    let k = logs.classes();
    (0..labels.num_items())
        .into_par_iter()
        .map_init(
            || vec![0.0; k],
            |scores, j| {
                log_scores(k, labels.votes(j), |i, l, g| logs.get(i, l, g), scores);
                log_sum_exp(scores)
            },
        )
        .collect()
}

/// Marginal log-likelihood of the observed labels with the true classes
/// summed out. The sum over `[k]^n` factorizes into per-item sums.
pub fn marginal_log_likelihood(confusion: &ConfusionTensor, labels: &LabelSet) -> f64 {
    marginal_log_likelihood_cube(confusion.cube(), labels)
}

pub(crate) fn marginal_log_likelihood_cube(confusion: &Cube, labels: &LabelSet) -> f64 {
    // fixed summation order keeps the value reproducible across thread counts
    item_terms(&log_cube(confusion), labels).iter().sum()
}

/// Batch statistic `w(i, l, g) = (1/n) Σ_j P(y_j = l | c, z_j) · 1(z_ij = g)`.
pub fn batch_statistic(confusion: &Cube, labels: &LabelSet) -> Cube {
    let posterior = posterior_all_cube(confusion, labels);
    let mut w = Cube::zeros(confusion.workers(), confusion.classes());
    for o in labels.observations() {
        for (l, &p) in posterior.row(o.item).iter().enumerate() {
            let idx = w.index(o.worker, l, o.class);
            w.as_mut_slice()[idx] += p;
        }
    }
    let n = labels.num_items().max(1) as f64;
    w.as_mut_slice().iter_mut().for_each(|v| *v /= n);
    w
}

#[derive(Clone, Debug)]
pub struct Residual {
    /// `W(normalize(s)) - s`.
    pub drift: Cube,
    pub max_abs: f64,
    pub frobenius: f64,
}

/// Mean-field drift of the statistics. Zero exactly at batch EM fixed points.
pub fn fixed_point_residual(stats: &Cube, labels: &LabelSet) -> Residual {
    let mut drift = batch_statistic(&normalize_cube(stats), labels);
    for (d, s) in drift.as_mut_slice().iter_mut().zip(stats.as_slice()) {
        *d -= s;
    }
    let max_abs = drift.max_abs();
    let frobenius = drift.frobenius();
    Residual {
        drift,
        max_abs,
        frobenius,
    }
}

/// Largest central-difference derivative of the marginal log-likelihood
/// along simplex-tangent directions `e_g - e_g'` of each confusion row.
///
/// Directions that would push an entry out of `(0, 1)` at step `h` are skipped.
pub fn stationarity_gap(confusion: &ConfusionTensor, labels: &LabelSet, h: f64) -> Result<f64> {
    if !(1e-7..=1e-4).contains(&h) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step {h} outside [1e-7, 1e-4]"
        )));
    }
    let k = confusion.classes();
    let logs = log_cube(confusion.cube());
    let base: Vec<Vec<f64>> = (0..labels.num_items())
        .map(|j| {
            let mut s = vec![0.0; k];
            log_scores(k, labels.votes(j), |i, l, g| logs.get(i, l, g), &mut s);
            s
        })
        .collect();

    let gaps: Vec<f64> = (0..labels.num_workers())
        .into_par_iter()
        .map(|worker| {
            // (item, answered class) for this worker
            let answered: Vec<(usize, usize)> = labels
                .items_of(worker)
                .iter()
                .map(|&j| {
                    let vote = labels.votes(j).iter().find(|v| v.worker == worker).unwrap();
                    (j, vote.class)
                })
                .collect();
            let mut worst = 0.0f64;
            let mut scratch = vec![0.0; k];
            // change in the item term when entry (worker, l, g) moves by `delta`
            let mut shifted = |j: usize, l: usize, g: usize, delta: f64| {
                let c = confusion.get(worker, l, g);
                scratch.copy_from_slice(&base[j]);
                scratch[l] += (c + delta).ln() - c.ln();
                log_sum_exp(&scratch)
            };
            for l in 0..k {
                for g in 0..k {
                    for g2 in g + 1..k {
                        let (cg, cg2) = (confusion.get(worker, l, g), confusion.get(worker, l, g2));
                        if cg - h <= 0.0 || cg2 - h <= 0.0 || cg + h >= 1.0 || cg2 + h >= 1.0 {
                            continue;
                        }
                        let mut diff = 0.0;
                        for &(j, answer) in &answered {
                            if answer == g {
                                diff += shifted(j, l, g, h) - shifted(j, l, g, -h);
                            } else if answer == g2 {
                                diff += shifted(j, l, g2, -h) - shifted(j, l, g2, h);
                            }
                        }
                        worst = worst.max((diff / (2.0 * h)).abs());
                    }
                }
            }
            worst
        })
        .collect();
    Ok(gaps.into_iter().fold(0.0, f64::max))
}
