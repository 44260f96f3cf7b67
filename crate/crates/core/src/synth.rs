//! Seeded synthetic crowdsourcing instances with a known confusion model.
//!
//! Each worker has a diagonal accuracy `u` drawn from `[lo, hi]` and spreads
//! the remaining mass evenly over the other classes. Every item is labeled
//! by `r` distinct workers chosen uniformly.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    save_checkpoint, write_labels, write_truth, ConfusionTensor, Cube, GroundTruth, LabelSet,
    LabelSetBuilder,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthConfig {
    pub workers: usize,
    pub items: usize,
    pub classes: usize,
    pub accuracy_lo: f64,
    pub accuracy_hi: f64,
    pub labels_per_item: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            workers: 30,
            items: 1000,
            classes: 3,
            accuracy_lo: 0.6,
            accuracy_hi: 0.9,
            labels_per_item: 5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.workers < 1 || self.items < 1 {
            return bad("need at least one worker and one item".into());
        }
        let chance = 1.0 / self.classes as f64;
        // lo = 1/k is allowed: it produces chance-level workers
        if !(self.accuracy_lo >= chance - 1e-12
            && self.accuracy_lo <= self.accuracy_hi
            && self.accuracy_hi < 1.0)
        {
            return bad(format!(
                "accuracy range [{}, {}] must satisfy 1/k <= lo <= hi < 1",
                self.accuracy_lo, self.accuracy_hi
            ));
        }
        if self.labels_per_item < 1 || self.labels_per_item > self.workers {
            return bad(format!(
                "labels per item {} must be in 1..={}",
                self.labels_per_item, self.workers
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthInstance {
    pub labels: LabelSet,
    pub truth: GroundTruth,
    /// Generating confusion rows, indexed like `labels` (first appearance).
    pub confusion: ConfusionTensor,
}

pub fn gen_instance(config: &SynthConfig) -> Result<SynthInstance> {
    config.validate()?;
    let SynthConfig {
        workers: m,
        items: n,
        classes: k,
        ..
    } = *config;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let span = config.accuracy_hi - config.accuracy_lo;
    let accuracy: Vec<f64> = (0..m)
        .map(|_| config.accuracy_lo + span * rng.gen::<f64>())
        .collect();
    let truth_classes: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();

    let mut builder = LabelSetBuilder::new(Some(k));
    let mut first_seen = Vec::new();
    let mut seen = vec![false; m];
    for (j, &y) in truth_classes.iter().enumerate() {
        let item_id = format!("t{}", j + 1);
        for worker in sample(&mut rng, m, config.labels_per_item).iter() {
            let label = if rng.gen::<f64>() < accuracy[worker] {
                y
            } else {
                // uniform over the k - 1 wrong classes
                let other = rng.gen_range(0..k - 1);
                if other >= y {
                    other + 1
                } else {
                    other
                }
            };
            if !seen[worker] {
                seen[worker] = true;
                first_seen.push(worker);
            }
            builder.push(0, &item_id, &format!("w{}", worker + 1), label as i64 + 1)?;
        }
    }
    let labels = builder.finish()?;

    let mut cube = Cube::zeros(first_seen.len(), k);
    for (idx, &worker) in first_seen.iter().enumerate() {
        let u = accuracy[worker];
        for l in 0..k {
            for g in 0..k {
                let value = if l == g { u } else { (1.0 - u) / (k - 1) as f64 };
                cube.set(idx, l, g, value);
            }
        }
    }
    let confusion = ConfusionTensor::new(cube)?;

    let mut truth = GroundTruth::default();
    for (j, &y) in truth_classes.iter().enumerate() {
        // item j was interned j-th since every item receives at least one vote
        truth.insert(j, y);
    }
    Ok(SynthInstance {
        labels,
        truth,
        confusion,
    })
}

impl SynthInstance {
    /// Writes `labels.csv`, `truth.csv` and `true_model.txt` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_labels(&self.labels, BufWriter::new(File::create(dir.join("labels.csv"))?))?;
        write_truth(
            &self.truth,
            &self.labels,
            BufWriter::new(File::create(dir.join("truth.csv"))?),
        )?;
        save_checkpoint(
            &self.confusion,
            BufWriter::new(File::create(dir.join("true_model.txt"))?),
        )?;
        Ok(())
    }
}
