//! Core data types.
//!
//! Class indices are 0-based in memory (`0..k`). The label files use the
//! 1-based values `1..=k`; conversion happens only at the I/O boundary.
//! A missing `(worker, item)` pair means "not labeled"; nothing is stored
//! for it.

mod io;

pub use io::{
    format_sig17, load_checkpoint, load_ground_truth, load_labels, save_checkpoint, write_labels,
    write_predictions, write_truth,
};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::ops::Deref;

use crate::error::{Error, Result};

/// Row-sum tolerance applied when validating a confusion tensor.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// One worker's answer on an item, as seen from that item.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Vote {
    pub worker: usize,
    pub class: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Observation {
    pub worker: usize,
    pub item: usize,
    pub class: usize,
}

/// Dense index assignment for external string ids, in first-appearance order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_owned());
        self.index.insert(id.to_owned(), i);
        i
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// Sparse worker × item label matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelSet {
    classes: usize,
    observations: Vec<Observation>,
    by_item: Vec<Vec<Vote>>,
    by_worker: Vec<Vec<usize>>,
    workers: IdMap,
    items: IdMap,
}

impl LabelSet {
    /// Builds a label set from 0-based `(worker, item, class)` triples.
    /// Ids are the decimal indices.
    pub fn from_triples(
        workers: usize,
        items: usize,
        classes: usize,
        triples: &[(usize, usize, usize)],
    ) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 classes, got {classes}"
            )));
        }
        let mut worker_map = IdMap::default();
        for i in 0..workers {
            worker_map.intern(&i.to_string());
        }
        let mut item_map = IdMap::default();
        for j in 0..items {
            item_map.intern(&j.to_string());
        }
        let mut seen = HashSet::new();
        let mut observations = Vec::with_capacity(triples.len());
        for &(worker, item, class) in triples {
            if worker >= workers || item >= items || class >= classes {
                return Err(Error::InvalidParameter(format!(
                    "triple ({worker}, {item}, {class}) outside {workers}x{items}x{classes}"
                )));
            }
            if !seen.insert((worker, item)) {
                return Err(Error::InvalidParameter(format!(
                    "worker {worker} labels item {item} twice"
                )));
            }
            observations.push(Observation {
                worker,
                item,
                class,
            });
        }
        Ok(Self::assemble(classes, observations, worker_map, item_map))
    }

    fn assemble(
        classes: usize,
        observations: Vec<Observation>,
        workers: IdMap,
        items: IdMap,
    ) -> Self {
        let mut by_item = vec![Vec::new(); items.len()];
        let mut by_worker = vec![Vec::new(); workers.len()];
        for o in &observations {
            by_item[o.item].push(Vote {
                worker: o.worker,
                class: o.class,
            });
            by_worker[o.worker].push(o.item);
        }
        Self {
            classes,
            observations,
            by_item,
            by_worker,
            workers,
            items,
        }
    }

    pub fn num_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    /// Observations in storage (file) order.
    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// The votes cast on item `j`, in storage order.
    pub fn votes(&self, item: usize) -> &[Vote] {
        &self.by_item[item]
    }

    /// Items labeled by worker `i`, in storage order.
    pub fn items_of(&self, worker: usize) -> &[usize] {
        &self.by_worker[worker]
    }

    pub fn worker_ids(&self) -> &IdMap {
        &self.workers
    }

    pub fn item_ids(&self) -> &IdMap {
        &self.items
    }

    /// Same observations with items renumbered: new item `j` is old item `order[j]`.
    pub fn permute_items(&self, order: &[usize]) -> Result<Self> {
        let n = self.num_items();
        let mut inverse = vec![usize::MAX; n];
        if order.len() != n {
            return Err(Error::InvalidParameter("permutation length mismatch".into()));
        }
        for (new, &old) in order.iter().enumerate() {
            if old >= n || inverse[old] != usize::MAX {
                return Err(Error::InvalidParameter("not a permutation".into()));
            }
            inverse[old] = new;
        }
        let mut items = IdMap::default();
        for &old in order {
            items.intern(self.items.id(old));
        }
        let mut observations: Vec<Observation> = self
            .observations
            .iter()
            .map(|o| Observation {
                item: inverse[o.item],
                ..*o
            })
            .collect();
        observations.sort_by_key(|o| o.item);
        Ok(Self::assemble(
            self.classes,
            observations,
            self.workers.clone(),
            items,
        ))
    }
}

/// Incremental construction of a [`LabelSet`] from string ids, used by the
/// CSV loader and the synthetic generator.
#[derive(Debug, Default)]
pub struct LabelSetBuilder {
    declared_classes: Option<usize>,
    max_class: usize,
    observations: Vec<Observation>,
    seen: HashSet<(usize, usize)>,
    workers: IdMap,
    items: IdMap,
}

impl LabelSetBuilder {
    pub fn new(declared_classes: Option<usize>) -> Self {
        Self {
            declared_classes,
            ..Self::default()
        }
    }

    /// Adds one row. `label` is the 1-based file value; `line` is used for errors.
    pub fn push(&mut self, line: u64, item: &str, worker: &str, label: i64) -> Result<()> {
        let upper = self.declared_classes.unwrap_or(usize::MAX);
        if label < 1 || (label as u64) > upper as u64 {
            return Err(Error::LabelOutOfRange {
                line,
                label,
                classes: self.declared_classes.unwrap_or(0),
            });
        }
        let i = self.workers.intern(worker);
        let j = self.items.intern(item);
        if !self.seen.insert((i, j)) {
            return Err(Error::DuplicatePair {
                line,
                worker: worker.to_owned(),
                item: item.to_owned(),
            });
        }
        let class = label as usize - 1;
        self.max_class = self.max_class.max(label as usize);
        self.observations.push(Observation {
            worker: i,
            item: j,
            class,
        });
        Ok(())
    }

    pub fn finish(self) -> Result<LabelSet> {
        let classes = self.declared_classes.unwrap_or(self.max_class);
        if classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 classes, got {classes} (declare the class count explicitly)"
            )));
        }
        Ok(LabelSet::assemble(
            classes,
            self.observations,
            self.workers,
            self.items,
        ))
    }
}

/// Dense `m × k × k` array indexed by (worker, true class, given label).
#[derive(Clone, Debug, PartialEq)]
pub struct Cube {
    workers: usize,
    classes: usize,
    data: Vec<f64>,
}

impl Cube {
    pub fn filled(workers: usize, classes: usize, value: f64) -> Self {
        Self {
            workers,
            classes,
            data: vec![value; workers * classes * classes],
        }
    }

    pub fn zeros(workers: usize, classes: usize) -> Self {
        Self::filled(workers, classes, 0.0)
    }

    pub fn from_vec(workers: usize, classes: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != workers * classes * classes {
            return Err(Error::InvalidTensor(format!(
                "expected {} entries for {workers}x{classes}x{classes}, got {}",
                workers * classes * classes,
                data.len()
            )));
        }
        Ok(Self {
            workers,
            classes,
            data,
        })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn index(&self, worker: usize, truth: usize, label: usize) -> usize {
        (worker * self.classes + truth) * self.classes + label
    }

    #[inline]
    pub fn get(&self, worker: usize, truth: usize, label: usize) -> f64 {
        self.data[self.index(worker, truth, label)]
    }

    #[inline]
    pub fn set(&mut self, worker: usize, truth: usize, label: usize, value: f64) {
        let idx = self.index(worker, truth, label);
        self.data[idx] = value;
    }

    /// The `k` entries for fixed (worker, true class).
    pub fn row(&self, worker: usize, truth: usize) -> &[f64] {
        let start = self.index(worker, truth, 0);
        &self.data[start..start + self.classes]
    }

    pub fn row_mut(&mut self, worker: usize, truth: usize) -> &mut [f64] {
        let start = self.index(worker, truth, 0);
        &mut self.data[start..start + self.classes]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Cube) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    fn same_shape(&self, other: &Cube) -> bool {
        self.workers == other.workers && self.classes == other.classes
    }
}

/// Worker confusion probabilities: entry (i, l, g) is the probability that
/// worker `i` answers `g` on an item whose true class is `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionTensor(Cube);

impl ConfusionTensor {
    /// Validates strict positivity and row sums (within [`ROW_SUM_TOLERANCE`]).
    pub fn new(cube: Cube) -> Result<Self> {
        for i in 0..cube.workers {
            for l in 0..cube.classes {
                let row = cube.row(i, l);
                if let Some(&bad) = row.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
                    return Err(Error::InvalidTensor(format!(
                        "entry {bad} for worker {i}, class {} not in (0, 1)",
                        l + 1
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::InvalidTensor(format!(
                        "row for worker {i}, class {} sums to {sum}",
                        l + 1
                    )));
                }
            }
        }
        Ok(Self(cube))
    }

    /// Row-stochastic tensor that may touch the boundary (unsmoothed M-step).
    pub(crate) fn from_cube_unchecked(cube: Cube) -> Self {
        Self(cube)
    }

    /// Every row equal to `1/k`: a worker that carries no information.
    pub fn uniform(workers: usize, classes: usize) -> Self {
        Self(Cube::filled(workers, classes, 1.0 / classes as f64))
    }

    pub fn cube(&self) -> &Cube {
        &self.0
    }

    pub fn into_cube(self) -> Cube {
        self.0
    }
}

impl Deref for ConfusionTensor {
    type Target = Cube;

    fn deref(&self) -> &Cube {
        &self.0
    }
}

/// Sufficient-statistic running averages; every entry in the open unit interval.
#[derive(Clone, Debug, PartialEq)]
pub struct StatTensor(Cube);

impl StatTensor {
    pub fn new(cube: Cube) -> Result<Self> {
        if let Some(&bad) = cube.data.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::InvalidTensor(format!(
                "statistic {bad} not in (0, 1)"
            )));
        }
        Ok(Self(cube))
    }

    pub(crate) fn from_cube_unchecked(cube: Cube) -> Self {
        Self(cube)
    }

    pub fn filled(workers: usize, classes: usize, value: f64) -> Result<Self> {
        Self::new(Cube::filled(workers, classes, value))
    }

    pub fn cube(&self) -> &Cube {
        &self.0
    }

    pub fn into_cube(self) -> Cube {
        self.0
    }

    pub(crate) fn cube_mut(&mut self) -> &mut Cube {
        &mut self.0
    }

    pub fn same_shape(&self, other: &Cube) -> bool {
        self.0.same_shape(other)
    }
}

impl Deref for StatTensor {
    type Target = Cube;

    fn deref(&self) -> &Cube {
        &self.0
    }
}

/// Per-item class responsibilities, `n × k`, rows summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorMatrix {
    classes: usize,
    data: Vec<f64>,
}

impl PosteriorMatrix {
    pub fn uniform(items: usize, classes: usize) -> Self {
        Self {
            classes,
            data: vec![1.0 / classes as f64; items * classes],
        }
    }

    pub fn from_rows(classes: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * classes);
        for (j, row) in rows.into_iter().enumerate() {
            if row.len() != classes {
                return Err(Error::InvalidParameter(format!(
                    "posterior row {j} has {} entries, expected {classes}",
                    row.len()
                )));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "posterior row {j} is not a probability vector"
                )));
            }
            data.extend(row);
        }
        Ok(Self { classes, data })
    }

    pub(crate) fn from_flat(classes: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len() % classes, 0);
        Self { classes, data }
    }

    pub fn num_items(&self) -> usize {
        self.data.len() / self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, item: usize) -> &[f64] {
        &self.data[item * self.classes..(item + 1) * self.classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.classes)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Known true classes for a subset of items.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundTruth {
    labels: BTreeMap<usize, usize>,
}

impl GroundTruth {
    pub fn new(labels: BTreeMap<usize, usize>, items: usize, classes: usize) -> Result<Self> {
        for (&item, &class) in &labels {
            if item >= items || class >= classes {
                return Err(Error::InvalidParameter(format!(
                    "truth entry ({item}, {class}) outside {items} items / {classes} classes"
                )));
            }
        }
        Ok(Self { labels })
    }

    pub fn get(&self, item: usize) -> Option<usize> {
        self.labels.get(&item).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(item, class)` pairs in item order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.labels.iter().map(|(&j, &l)| (j, l))
    }

    pub(crate) fn insert(&mut self, item: usize, class: usize) -> Option<usize> {
        self.labels.insert(item, class)
    }
}
