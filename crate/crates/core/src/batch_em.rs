//! Batch Dawid-Skene EM with soft majority-vote initialization.

use crate::error::{Error, Result};
use crate::estep::posterior_all_cube;
use crate::metrics::marginal_log_likelihood_cube;
use crate::model::{ConfusionTensor, Cube, LabelSet, PosteriorMatrix};

pub const DEFAULT_SMOOTHING: f64 = 1e-9;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 50;

/// Soft majority vote: the fraction of an item's votes for each class.
/// Unlabeled items get the uniform row.
pub fn mv_posterior(labels: &LabelSet) -> PosteriorMatrix {
    let k = labels.num_classes();
    let mut data = vec![0.0; labels.num_items() * k];
    for (j, row) in data.chunks_exact_mut(k).enumerate() {
        let votes = labels.votes(j);
        if votes.is_empty() {
            row.iter_mut().for_each(|p| *p = 1.0 / k as f64);
            continue;
        }
        for vote in votes {
            row[vote.class] += 1.0;
        }
        let total = votes.len() as f64;
        row.iter_mut().for_each(|p| *p /= total);
    }
    PosteriorMatrix::from_flat(k, data)
}

/// Responsibility-weighted label counts `Σ_j p_jl · 1(z_ij = g)`.
pub(crate) fn weighted_counts(posterior: &PosteriorMatrix, labels: &LabelSet) -> Cube {
    let mut counts = Cube::zeros(labels.num_workers(), labels.num_classes());
    for o in labels.observations() {
        for (l, &p) in posterior.row(o.item).iter().enumerate() {
            let idx = counts.index(o.worker, l, o.class);
            counts.as_mut_slice()[idx] += p;
        }
    }
    counts
}

/// Closed-form M-step with additive smoothing `alpha` on every count.
///
/// Workers with no labels get uniform rows. With `alpha = 0` the result can
/// contain exact zeros and ones; with `alpha > 0` it is strictly positive.
pub fn m_step(
    posterior: &PosteriorMatrix,
    labels: &LabelSet,
    alpha: f64,
) -> Result<ConfusionTensor> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "smoothing must be a finite non-negative number, got {alpha}"
        )));
    }
    if posterior.num_items() != labels.num_items() || posterior.num_classes() != labels.num_classes() {
        return Err(Error::InvalidParameter(
            "posterior shape does not match the label set".into(),
        ));
    }
    let k = labels.num_classes();
    let mut c = weighted_counts(posterior, labels);
    for i in 0..labels.num_workers() {
        let unlabeled = labels.items_of(i).is_empty();
        for l in 0..k {
            let row = c.row_mut(i, l);
            if unlabeled {
                row.iter_mut().for_each(|v| *v = 1.0 / k as f64);
                continue;
            }
            let denom = k as f64 * alpha + row.iter().sum::<f64>();
            if denom <= 0.0 {
                return Err(Error::DegenerateWorker {
                    worker: i,
                    class: l,
                });
            }
            row.iter_mut().for_each(|v| *v = (alpha + *v) / denom);
        }
    }
    Ok(ConfusionTensor::from_cube_unchecked(c))
}

/// Arg-max class per item; ties go to the smallest class index.
pub fn predict(posterior: &PosteriorMatrix) -> Vec<usize> {
    posterior
        .rows()
        .map(|row| {
            let mut best = 0;
            for (l, &p) in row.iter().enumerate().skip(1) {
                if p > row[best] {
                    best = l;
                }
            }
            best
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Relative log-likelihood change that ends the run.
    pub tol: f64,
    pub smoothing: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            smoothing: DEFAULT_SMOOTHING,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EmFit {
    pub confusion: ConfusionTensor,
    /// Responsibilities that produced `confusion` in the final M-step.
    pub posterior: PosteriorMatrix,
    /// Marginal log-likelihood after each M-step; entry 0 is the model built
    /// from the initial responsibilities.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

impl EmFit {
    /// Number of E/M rounds after the initial M-step.
    pub fn iterations(&self) -> usize {
        self.log_likelihood.len() - 1
    }
}

/// Runs EM from `init`.
///
/// Iteration 0 is the M-step on `init`. Each later iteration is an E-step
/// under the current model followed by an M-step. The run stops once the
/// log-likelihood changes by less than `tol · (1 + |ll|)` or after
/// `max_iter` rounds.
pub fn em_fit(labels: &LabelSet, init: &PosteriorMatrix, config: &EmConfig) -> Result<EmFit> {
    em_fit_with(labels, init, config, |_, _, _| {})
}

/// As [`em_fit`], calling `observe(iteration, responsibilities, log_likelihood)`
/// after every M-step, including iteration 0.
pub fn em_fit_with<F>(
    labels: &LabelSet,
    init: &PosteriorMatrix,
    config: &EmConfig,
    mut observe: F,
) -> Result<EmFit>
where
    F: FnMut(usize, &PosteriorMatrix, f64),
{
    if config.max_iter < 1 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }
    if !(config.tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let mut posterior = init.clone();
    let mut confusion = m_step(&posterior, labels, config.smoothing)?;
    let mut ll = marginal_log_likelihood_cube(confusion.cube(), labels);
    let mut trajectory = vec![ll];
    observe(0, &posterior, ll);

    let mut converged = false;
    for iteration in 1..=config.max_iter {
        posterior = posterior_all_cube(confusion.cube(), labels);
        confusion = m_step(&posterior, labels, config.smoothing)?;
        let next = marginal_log_likelihood_cube(confusion.cube(), labels);
        trajectory.push(next);
        observe(iteration, &posterior, next);
        let change = (next - ll).abs();
        ll = next;
        if change < config.tol * (1.0 + ll.abs()) {
            converged = true;
            break;
        }
    }
    Ok(EmFit {
        confusion,
        posterior,
        log_likelihood: trajectory,
        converged,
    })
}
