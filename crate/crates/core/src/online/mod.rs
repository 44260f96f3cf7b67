//! Online Dawid-Skene: one item per iteration, with the M-step replaced by a
//! stochastic-approximation update of the sufficient statistics.
//!
//! The state is a statistic tensor `s` in `(0, 1)^{m×k×k}`. Each iteration
//! draws one item, computes its responsibilities under `normalize(s)`, and
//! moves `s` a step `η_j` toward the item's statistic. An optional
//! projection resets `s` whenever it leaves a growing family of boxes.

mod projection;
mod schedule;

pub use projection::ProjectionFamily;
pub use schedule::{ScheduleKind, StepSchedule};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::batch_em::{mv_posterior, predict, weighted_counts};
use crate::error::{Error, Result};
use crate::estep::{log_scores, normalize_scores, posterior_all_cube};
use crate::metrics::{error_rate, marginal_log_likelihood_cube};
use crate::model::{ConfusionTensor, Cube, GroundTruth, LabelSet, PosteriorMatrix, StatTensor, Vote};

/// Default `ε_0 = 2^-30`, on the order of the batch smoothing constant.
pub const DEFAULT_BOX_EXPONENT: i32 = 30;

/// Row-normalizes a statistic tensor into a confusion tensor.
pub fn normalize(stats: &StatTensor) -> ConfusionTensor {
    ConfusionTensor::from_cube_unchecked(normalize_cube(stats.cube()))
}

/// Row normalization for raw statistics; rows with no mass become uniform.
pub(crate) fn normalize_cube(stats: &Cube) -> Cube {
    let k = stats.classes();
    let mut c = stats.clone();
    for i in 0..c.workers() {
        for l in 0..k {
            let row = c.row_mut(i, l);
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|v| *v /= total);
            } else {
                row.iter_mut().for_each(|v| *v = 1.0 / k as f64);
            }
        }
    }
    c
}

/// Responsibilities for one item under `normalize(stats)`, without
/// materializing the normalized tensor.
fn posterior_from_stats(stats: &Cube, votes: &[Vote], out: &mut [f64]) {
    let k = stats.classes();
    log_scores(
        k,
        votes,
        |i, l, g| stats.get(i, l, g).ln() - stats.row(i, l).iter().sum::<f64>().ln(),
        out,
    );
    normalize_scores(out);
}

/// Candidate statistics `s + η (a - s)` where `a` is the item's statistic
/// under `normalize(s)`.
pub fn sa_update(stats: &StatTensor, votes: &[Vote], eta: f64) -> Cube {
    let mut candidate = Cube::zeros(stats.workers(), stats.classes());
    let mut target = Cube::zeros(stats.workers(), stats.classes());
    let mut p = vec![0.0; stats.classes()];
    sa_update_into(stats.cube(), votes, eta, &mut p, &mut target, &mut candidate);
    candidate
}

fn sa_update_into(
    stats: &Cube,
    votes: &[Vote],
    eta: f64,
    p: &mut [f64],
    target: &mut Cube,
    candidate: &mut Cube,
) {
    posterior_from_stats(stats, votes, p);
    for vote in votes {
        for (l, &pl) in p.iter().enumerate() {
            target.set(vote.worker, l, vote.class, pl);
        }
    }
    for ((c, &s), &a) in candidate
        .as_mut_slice()
        .iter_mut()
        .zip(stats.as_slice())
        .zip(target.as_slice())
    {
        *c = s + eta * (a - s);
    }
    // leave the target buffer zeroed for the next call
    for vote in votes {
        for l in 0..p.len() {
            target.set(vote.worker, l, vote.class, 0.0);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMode {
    /// Batch statistic under soft majority-vote responsibilities.
    MajorityVote,
    /// Every entry 0.5.
    Uniform,
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mv" => Ok(InitMode::MajorityVote),
            "uniform" => Ok(InitMode::Uniform),
            other => Err(Error::InvalidParameter(format!(
                "unknown init {other:?} (expected mv or uniform)"
            ))),
        }
    }
}

/// Initial statistics, clamped into `[floor, 1 - floor]`.
pub fn init_stats(labels: &LabelSet, mode: InitMode, floor: f64) -> Result<StatTensor> {
    if !(floor > 0.0 && floor < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "clamp floor {floor} outside (0, 0.5)"
        )));
    }
    let (m, k) = (labels.num_workers(), labels.num_classes());
    match mode {
        InitMode::Uniform => StatTensor::filled(m, k, 0.5),
        InitMode::MajorityVote => {
            let mut s = weighted_counts(&mv_posterior(labels), labels);
            let n = labels.num_items().max(1) as f64;
            s.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = (*v / n).clamp(floor, 1.0 - floor));
            StatTensor::new(s)
        }
    }
}

/// Starting point of an online run: the statistics and the responsibilities
/// they were built from (used for the epoch-0 report).
#[derive(Clone, Debug)]
pub struct Initialization {
    pub stats: StatTensor,
    pub responsibilities: PosteriorMatrix,
}

impl Initialization {
    pub fn new(labels: &LabelSet, mode: InitMode, box_exponent: i32) -> Result<Self> {
        let stats = init_stats(labels, mode, 2f64.powi(-box_exponent))?;
        let responsibilities = match mode {
            InitMode::MajorityVote => mv_posterior(labels),
            InitMode::Uniform => posterior_all_cube(&normalize_cube(stats.cube()), labels),
        };
        Ok(Self {
            stats,
            responsibilities,
        })
    }
}

/// Evolving online state. The confusion tensor is always `normalize(stats)`.
#[derive(Clone, Debug)]
pub struct OnlineState {
    stats: StatTensor,
    iteration: u64,
    projection: Option<ProjectionFamily>,
    rng: ChaCha8Rng,
    p: Vec<f64>,
    target: Cube,
    candidate: Cube,
}

impl OnlineState {
    pub fn new(stats: StatTensor, projection: Option<ProjectionFamily>, seed: u64) -> Result<Self> {
        if let Some(family) = &projection {
            if !family.reset_point().same_shape(stats.cube()) {
                return Err(Error::InvalidParameter(
                    "reset point shape differs from the statistics".into(),
                ));
            }
        }
        let (m, k) = (stats.workers(), stats.classes());
        Ok(Self {
            stats,
            iteration: 0,
            projection,
            rng: ChaCha8Rng::seed_from_u64(seed),
            p: vec![0.0; k],
            target: Cube::zeros(m, k),
            candidate: Cube::zeros(m, k),
        })
    }

    pub fn stats(&self) -> &StatTensor {
        &self.stats
    }

    pub fn confusion(&self) -> ConfusionTensor {
        normalize(&self.stats)
    }

    /// Completed updates `j`.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Projection counter `t` (0 when projection is off).
    pub fn projections(&self) -> u32 {
        self.projection.as_ref().map_or(0, |f| f.counter())
    }

    pub fn projection(&self) -> Option<&ProjectionFamily> {
        self.projection.as_ref()
    }

    /// One update with the votes of a single item. Returns whether the
    /// projection reset the state.
    pub fn step(&mut self, votes: &[Vote], schedule: &StepSchedule) -> bool {
        self.iteration += 1;
        let eta = schedule.eta(self.iteration);
        sa_update_into(
            self.stats.cube(),
            votes,
            eta,
            &mut self.p,
            &mut self.target,
            &mut self.candidate,
        );
        match &mut self.projection {
            Some(family) => {
                if family.contains(&self.candidate) {
                    std::mem::swap(self.stats.cube_mut(), &mut self.candidate);
                    false
                } else {
                    let (reset, _) = family.project(self.candidate.clone());
                    self.stats = reset;
                    true
                }
            }
            None => {
                std::mem::swap(self.stats.cube_mut(), &mut self.candidate);
                false
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    /// Items drawn i.i.d. uniformly.
    WithReplacement,
    /// A fresh permutation of the items every epoch.
    Shuffle,
}

impl fmt::Display for Sampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sampling::WithReplacement => f.write_str("with-replacement"),
            Sampling::Shuffle => f.write_str("shuffle"),
        }
    }
}

impl FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "with-replacement" => Ok(Sampling::WithReplacement),
            "shuffle" => Ok(Sampling::Shuffle),
            other => Err(Error::InvalidParameter(format!(
                "unknown sampling {other:?} (expected with-replacement or shuffle)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OnlineConfig {
    pub schedule: StepSchedule,
    pub epochs: usize,
    pub seed: u64,
    pub sampling: Sampling,
    pub projection: bool,
    /// `ε_0 = 2^-box_exponent` for the projection boxes and the init clamp.
    pub box_exponent: i32,
}

impl OnlineConfig {
    pub fn new(schedule: StepSchedule) -> Self {
        Self {
            schedule,
            epochs: 10,
            seed: 0,
            sampling: Sampling::WithReplacement,
            projection: true,
            box_exponent: DEFAULT_BOX_EXPONENT,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub error_rate: Option<f64>,
    pub log_likelihood: f64,
    /// Cumulative projection resets.
    pub projections: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProjectionEvent {
    pub iteration: u64,
    pub epoch: usize,
    /// Counter `t` after the reset.
    pub counter: u32,
}

#[derive(Clone, Debug)]
pub struct OnlineFit {
    pub confusion: ConfusionTensor,
    pub stats: StatTensor,
    /// Entry 0 describes the initialization.
    pub epochs: Vec<EpochRecord>,
    pub projection_events: Vec<ProjectionEvent>,
}

fn epoch_record(
    epoch: usize,
    stats: &StatTensor,
    responsibilities: Option<&PosteriorMatrix>,
    labels: &LabelSet,
    truth: Option<&GroundTruth>,
    projections: u32,
) -> Result<EpochRecord> {
    let confusion = normalize_cube(stats.cube());
    let error_rate = match truth {
        Some(truth) => {
            let posterior;
            let responsibilities = match responsibilities {
                Some(r) => r,
                None => {
                    posterior = posterior_all_cube(&confusion, labels);
                    &posterior
                }
            };
            Some(error_rate(&predict(responsibilities), truth)?)
        }
        None => None,
    };
    Ok(EpochRecord {
        epoch,
        error_rate,
        log_likelihood: marginal_log_likelihood_cube(&confusion, labels),
        projections,
    })
}

/// Runs `epochs · n` online iterations.
///
/// Metrics are recorded at initialization and after every epoch. The run is
/// a deterministic function of its inputs and `config.seed`.
pub fn online_fit(
    labels: &LabelSet,
    truth: Option<&GroundTruth>,
    init: &Initialization,
    config: &OnlineConfig,
) -> Result<OnlineFit> {
    if config.epochs < 1 {
        return Err(Error::InvalidParameter("epochs must be at least 1".into()));
    }
    if !init.stats.same_shape(&Cube::zeros(labels.num_workers(), labels.num_classes())) {
        return Err(Error::InvalidParameter(
            "initial statistics do not match the label set".into(),
        ));
    }
    let projection = if config.projection {
        Some(ProjectionFamily::new(config.box_exponent, init.stats.clone())?)
    } else {
        None
    };
    let mut state = OnlineState::new(init.stats.clone(), projection, config.seed)?;
    let n = labels.num_items();
    let mut epochs = vec![epoch_record(
        0,
        state.stats(),
        Some(&init.responsibilities),
        labels,
        truth,
        0,
    )?];
    let mut events = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 1..=config.epochs {
        if config.sampling == Sampling::Shuffle {
            order.shuffle(&mut state.rng);
        }
        for &next in &order {
            let item = match config.sampling {
                Sampling::WithReplacement => state.rng.gen_range(0..n),
                Sampling::Shuffle => next,
            };
            if state.step(labels.votes(item), &config.schedule) {
                events.push(ProjectionEvent {
                    iteration: state.iteration(),
                    epoch,
                    counter: state.projections(),
                });
            }
        }
        epochs.push(epoch_record(
            epoch,
            state.stats(),
            None,
            labels,
            truth,
            state.projections(),
        )?);
    }
    Ok(OnlineFit {
        confusion: state.confusion(),
        stats: state.stats,
        epochs,
        projection_events: events,
    })
}
