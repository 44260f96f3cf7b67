//! Truth inference for crowdsourced labels with the Dawid-Skene worker
//! confusion model.
//!
//! Two estimators share the same E-step:
//!
//! - [`batch_em`]: the classic EM loop over the whole label matrix.
//! - [`online`]: one item per iteration, updating running sufficient
//!   statistics with a decreasing step size and an optional projection.
//!
//! [`metrics`] measures error rates, the marginal log-likelihood, and how
//! close a model is to a fixed point; [`synth`] and [`oracle`] provide seeded
//! test instances and exact brute-force references.
//!
//! ```
//! use online_dawid_skene::prelude::*;
//!
//! let labels = load_labels("item,worker,label\na,w1,1\na,w2,1\nb,w1,2\n".as_bytes(), None)?;
//! let fit = em_fit(&labels, &mv_posterior(&labels), &EmConfig::default())?;
//! assert_eq!(predict(&fit.posterior), vec![0, 1]);
//! # Ok::<(), online_dawid_skene::Error>(())
//! ```

pub mod batch_em;
pub mod cli;
pub mod error;
pub mod estep;
pub mod metrics;
pub mod model;
pub mod online;
pub mod oracle;
pub mod synth;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::batch_em::{em_fit, m_step, mv_posterior, predict, EmConfig, EmFit};
    pub use crate::estep::{posterior, posterior_all, sample_stat};
    pub use crate::metrics::{
        error_rate, fixed_point_residual, format_error_rate, marginal_log_likelihood,
        stationarity_gap,
    };
    pub use crate::model::{
        load_checkpoint, load_ground_truth, load_labels, save_checkpoint, ConfusionTensor, Cube,
        GroundTruth, LabelSet, PosteriorMatrix, StatTensor, Vote,
    };
    pub use crate::online::{
        normalize, online_fit, InitMode, Initialization, OnlineConfig, OnlineFit, Sampling,
        ScheduleKind, StepSchedule,
    };
    pub use crate::synth::{gen_instance, SynthConfig, SynthInstance};
}
