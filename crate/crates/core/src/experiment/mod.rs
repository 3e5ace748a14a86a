//! Classification experiments: losses, prediction rules, splitting, the
//! retrying trial driver, permutation sweeps and the shot-budgeted hardware
//! protocol.

mod hardware;
mod stats;
mod trial;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::ansatz::{ttn_one_qudit, ttn_two_qudit, universal_two_qubit};
use crate::circuit::ParamCircuit;
use crate::encoding::Scheme;
use crate::random::{derive_seed, stream_rng};
use crate::{Error, Result};

pub use hardware::{
    run_hardware_protocol, HardwareConfig, HardwareRun, HardwareSummary, IterationBand, IterationRecord,
};
pub use stats::{five_number_summary, mean_std, quantile_type7, FiveNumber};
pub use trial::{
    run_optimized, run_repeated, run_sweep, run_trial, ClassifierOptimizer, EncodingMode, ExperimentConfig,
    OptimizedSummary, PermutationResult, RetryMetric, SweepSummary, TrialRecord,
};

pub const NUM_CLASSES: usize = 3;

/// Raw feature vectors with labels in {0, 1, 2}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(name: &str, feature_names: Vec<String>, points: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), found: labels.len() });
        }
        if points.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        let k = feature_names.len();
        if let Some(p) = points.iter().find(|p| p.len() != k) {
            return Err(Error::DimensionMismatch { expected: k, found: p.len() });
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= NUM_CLASSES) {
            return Err(Error::InvalidLabel(y));
        }
        for c in 0..NUM_CLASSES {
            if !labels.contains(&c) {
                return Err(Error::Dataset(format!("class {c} has no points")));
            }
        }
        Ok(Self { name: name.to_string(), feature_names, points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut c = [0; NUM_CLASSES];
        for &y in &self.labels {
            c[y] += 1;
        }
        c
    }
}

/// Train/test partition of a dataset, as point indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn has_all_classes(idx: &[usize], labels: &[usize]) -> bool {
    (0..NUM_CLASSES).all(|c| idx.iter().any(|&i| labels[i] == c))
}

/// Unstratified random split with `round(train_fraction·n)` training points.
/// A draw whose training part misses a class is redrawn once.
pub fn split_dataset(ds: &LabeledDataset, seed: u64, train_fraction: f64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let n = ds.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::Dataset(format!("cannot split {n} points with fraction {train_fraction}")));
    }
    for attempt in 0..2u64 {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut stream_rng(seed, attempt));
        let test = idx.split_off(n_train);
        if has_all_classes(&idx, &ds.labels) {
            return Ok(Split { train: idx, test });
        }
    }
    Err(Error::Dataset("training split is missing a class after resampling".into()))
}

/// How output probabilities map to class labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convention {
    /// `P(|0⟩)` in [0, 0.33], (0.33, 0.67] or (0.67, 1] gives 0, 1 or 2.
    OneQubitInterval,
    /// Argmax over |0⟩, |1⟩, |2⟩.
    OneQutrit,
    /// Argmax over |00⟩, |01⟩, |10⟩.
    TwoQubit,
    /// Argmax over the second qutrit's marginal.
    TwoQutritSecond,
}

impl Convention {
    /// Probability of the outcome that stands for each label.
    pub fn label_probs(self, probs: &[f64]) -> [f64; NUM_CLASSES] {
        match self {
            Convention::OneQubitInterval => [probs[0], probs[0], probs[0]],
            Convention::OneQutrit | Convention::TwoQubit => [probs[0], probs[1], probs[2]],
            Convention::TwoQutritSecond => {
                let mut m = [0.0; 3];
                for (i, p) in probs.iter().enumerate() {
                    m[i % 3] += p;
                }
                m
            }
        }
    }
}

fn argmax(v: &[f64; NUM_CLASSES]) -> usize {
    // Strict comparison keeps the smaller label on ties.
    let mut best = 0;
    for k in 1..NUM_CLASSES {
        if v[k] > v[best] {
            best = k;
        }
    }
    best
}

/// Predicted label for the measurement distribution `probs`.
pub fn predict_label(probs: &[f64], convention: Convention) -> usize {
    match convention {
        Convention::OneQubitInterval => {
            let p0 = probs[0];
            if p0 <= 0.33 {
                0
            } else if p0 <= 0.67 {
                1
            } else {
                2
            }
        }
        _ => argmax(&convention.label_probs(probs)),
    }
}

fn check_label(y: usize) -> Result<usize> {
    if y < NUM_CLASSES {
        Ok(y)
    } else {
        Err(Error::InvalidLabel(y))
    }
}

/// `Σᵢ (1 − P(|yᵢ⟩))²`.
pub fn loss_squared(probs: &[Vec<f64>], labels: &[usize], convention: Convention) -> Result<f64> {
    per_point_sum(probs, labels, |p, y| {
        let q = convention.label_probs(p)[y];
        (1.0 - q) * (1.0 - q)
    })
}

/// `Σᵢ (1 − P(|yᵢ⟩))`.
pub fn loss_linear(probs: &[Vec<f64>], labels: &[usize], convention: Convention) -> Result<f64> {
    per_point_sum(probs, labels, |p, y| 1.0 - convention.label_probs(p)[y])
}

fn per_point_sum(probs: &[Vec<f64>], labels: &[usize], f: impl Fn(&[f64], usize) -> f64) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: probs.len(), found: labels.len() });
    }
    let mut total = 0.0;
    for (p, &y) in probs.iter().zip(labels) {
        total += f(p, check_label(y)?);
    }
    Ok(total)
}

/// Single-point loss for one qubit: `P₀`, `|P₀ − 0.5|` or `1 − P₀` for
/// labels 0, 1, 2.
pub fn loss_one_qubit(prob0: f64, label: usize) -> Result<f64> {
    Ok(match check_label(label)? {
        0 => prob0,
        1 => (prob0 - 0.5).abs(),
        _ => 1.0 - prob0,
    })
}

/// Classifier configurations compared in the benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Qubit1Nce,
    Qutrit1Nce,
    Qubit2NceShort,
    Qubit2NceLong,
    Qutrit2Nae,
    Qutrit2Npe,
}

impl Cell {
    pub const ALL: [Cell; 6] = [
        Cell::Qubit1Nce,
        Cell::Qutrit1Nce,
        Cell::Qubit2NceShort,
        Cell::Qubit2NceLong,
        Cell::Qutrit2Nae,
        Cell::Qutrit2Npe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Cell::Qubit1Nce => "qubit1-nce",
            Cell::Qutrit1Nce => "qutrit1-nce",
            Cell::Qubit2NceShort => "qubit2-nce-short",
            Cell::Qubit2NceLong => "qubit2-nce-long",
            Cell::Qutrit2Nae => "qutrit2-nae",
            Cell::Qutrit2Npe => "qutrit2-npe",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Cell::Qubit1Nce | Cell::Qubit2NceShort | Cell::Qubit2NceLong => 2,
            _ => 3,
        }
    }

    pub fn num_qudits(self) -> usize {
        match self {
            Cell::Qubit1Nce | Cell::Qutrit1Nce => 1,
            _ => 2,
        }
    }

    pub fn scheme(self) -> Scheme {
        match self {
            Cell::Qutrit2Nae => Scheme::Nae,
            Cell::Qutrit2Npe => Scheme::Npe,
            _ => Scheme::Nce,
        }
    }

    /// Number of features the encoding register holds.
    pub fn features_encoded(self) -> usize {
        self.scheme().capacity(self.dim()) * self.num_qudits()
    }

    pub fn convention(self) -> Convention {
        match self {
            Cell::Qubit1Nce => Convention::OneQubitInterval,
            Cell::Qutrit1Nce => Convention::OneQutrit,
            Cell::Qubit2NceShort | Cell::Qubit2NceLong => Convention::TwoQubit,
            Cell::Qutrit2Nae | Cell::Qutrit2Npe => Convention::TwoQutritSecond,
        }
    }

    pub fn circuit(self) -> ParamCircuit {
        let c = match self {
            Cell::Qubit1Nce => ttn_one_qudit(2),
            Cell::Qutrit1Nce => ttn_one_qudit(3),
            Cell::Qubit2NceShort => ttn_two_qudit(2),
            Cell::Qubit2NceLong => Ok(universal_two_qubit()),
            Cell::Qutrit2Nae | Cell::Qutrit2Npe => ttn_two_qudit(3),
        };
        c.expect("supported dimensions")
    }

    pub fn param_count(self) -> usize {
        self.circuit().param_count()
    }

    /// Feature orderings swept for `k` dataset features: ordered selections
    /// of as many features as the register encodes.
    pub fn orderings(self, k: usize) -> Vec<Vec<usize>> {
        ordered_selections(k, self.features_encoded().min(k))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Cell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Cell::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| Error::Parse(format!("unknown cell '{s}'")))
    }
}

/// All ordered selections of `r` distinct items from `0..n`, in
/// lexicographic order.
pub fn ordered_selections(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !cur.contains(&i) {
                cur.push(i);
                rec(n, r, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(n, r, &mut Vec::with_capacity(r), &mut out);
    out
}

/// Seed of trial `t` under master seed `seed`.
pub fn trial_seed(seed: u64, t: usize) -> u64 {
    derive_seed(seed, t as u64)
}
