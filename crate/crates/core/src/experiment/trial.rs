use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    five_number_summary, loss_one_qubit, mean_std, predict_label, split_dataset, trial_seed, Cell, Convention,
    FiveNumber, LabeledDataset, Split, NUM_CLASSES,
};
use crate::circuit::ParamCircuit;
use crate::encoding::{Affine, EncodingSpec, RescaleMap};
use crate::encoding_opt::{refine_encoding, train_encoding, EncodingLossReport, LossMode, ShotProtocol};
use crate::optim::{quasi_newton_minimize, rotosolve_minimize, LbfgsConfig, RotosolveConfig, SpsaConfig};
use crate::random::{derive_seed, stream_rng, uniform_angles};
use crate::shots::sample_counts_with;
use crate::state::matvec;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncodingMode {
    /// Encode the raw features in this order.
    Fixed(Vec<usize>),
    /// Train `φ = Wx + b` on the training split first.
    Optimized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassifierOptimizer {
    /// Quasi-Newton on the squared loss.
    QuasiNewton,
    /// Rotosolve on the linear loss.
    Rotosolve,
}

/// Accuracy compared against the retry threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RetryMetric {
    Test,
    Train,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub cell: Cell,
    pub encoding: EncodingMode,
    pub optimizer: ClassifierOptimizer,
    pub repetitions: usize,
    pub train_fraction: f64,
    pub retry_threshold: f64,
    pub max_retries: usize,
    pub retry_metric: RetryMetric,
    /// SPSA steps of encoding training.
    pub encoding_iterations: usize,
    /// Follow SPSA with quasi-Newton steps on the exact encoding loss.
    /// Ignored under shot estimation.
    pub encoding_refine: bool,
    pub rotosolve_iterations: usize,
    /// Shot-based estimation for encoding training and the classifier loss
    /// (`shots_per_pair` shots per training point); exact when absent.
    pub shots: Option<ShotProtocol>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(cell: Cell, encoding: EncodingMode) -> Self {
        Self {
            cell,
            encoding,
            optimizer: ClassifierOptimizer::QuasiNewton,
            repetitions: 50,
            train_fraction: 2.0 / 3.0,
            retry_threshold: 0.8,
            max_retries: 10,
            retry_metric: RetryMetric::Test,
            encoding_iterations: 100,
            encoding_refine: true,
            rotosolve_iterations: 32,
            shots: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be positive".into()));
        }
        if self.encoding == EncodingMode::Optimized && self.cell == Cell::Qubit1Nce {
            return Err(Error::Config("optimized encoding needs a register holding all features".into()));
        }
        if let Some(p) = &self.shots {
            p.validate()?;
        }
        Ok(())
    }
}

/// Outcome of one train/test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub split: Split,
    pub feature_order: Vec<usize>,
    pub theta: Vec<f64>,
    pub affine: Option<Affine>,
    /// Exact encoding loss at `W = I, b = 0` and after training.
    pub encoding_reports: Option<(EncodingLossReport, EncodingLossReport)>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub retries: usize,
    pub loss_history: Vec<f64>,
    /// Every optimization attempt failed; accuracies are then 0.
    pub failed: bool,
}

/// Encoded points with labels.
pub(crate) struct Encoded {
    pub amps: Vec<Vec<Complex64>>,
    pub labels: Vec<usize>,
}

impl Encoded {
    pub fn new(points: &[Vec<f64>], labels: &[usize], spec: &EncodingSpec) -> Result<Self> {
        let mut amps = Vec::with_capacity(points.len());
        for x in points {
            let angles = spec.slot_angles(x)?;
            if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
                return Err(Error::NonFinite(format!("encoding angle {a}")));
            }
            let mut v = Vec::new();
            spec.amplitudes_from_slots(&angles, &mut v);
            amps.push(v);
        }
        Ok(Self { amps, labels: labels.to_vec() })
    }

    /// Output distributions under `u`.
    pub fn probabilities(&self, u: &DMatrix<Complex64>) -> Vec<Vec<f64>> {
        let n = u.nrows();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        self.amps
            .iter()
            .map(|a| {
                matvec(u, a, &mut out);
                out.iter().map(|c| c.norm_sqr()).collect()
            })
            .collect()
    }
}

/// Replaces each distribution by the frequencies of `shots` samples.
pub(crate) fn sampled(probs: Vec<Vec<f64>>, shots: u64, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    probs
        .into_iter()
        .map(|p| {
            let counts = sample_counts_with(&p, shots, rng)?;
            Ok(counts.into_iter().map(|c| c as f64 / shots as f64).collect())
        })
        .collect()
}

pub(crate) fn accuracy(probs: &[Vec<f64>], labels: &[usize], convention: Convention) -> f64 {
    let hits = probs.iter().zip(labels).filter(|(p, &y)| predict_label(p, convention) == y).count();
    hits as f64 / labels.len() as f64
}

/// Classifier loss: the one-qubit rule for one qubit, otherwise squared
/// (`linear = false`) or linear error of the label probability.
pub(crate) fn classifier_loss(probs: &[Vec<f64>], labels: &[usize], convention: Convention, linear: bool) -> f64 {
    let mut total = 0.0;
    for (p, &y) in probs.iter().zip(labels) {
        total += if convention == Convention::OneQubitInterval {
            loss_one_qubit(p[0], y).unwrap_or(f64::NAN)
        } else {
            let q = 1.0 - convention.label_probs(p)[y];
            if linear {
                q
            } else {
                q * q
            }
        };
    }
    total
}

/// Objective over the classifier parameters.
pub(crate) struct ClassifierObjective<'a> {
    pub circuit: &'a ParamCircuit,
    pub data: &'a Encoded,
    pub convention: Convention,
    pub linear: bool,
    /// Shots per point and the stream used to draw them.
    pub shots: Option<(u64, ChaCha8Rng)>,
}

impl ClassifierObjective<'_> {
    pub fn eval(&mut self, theta: &[f64]) -> f64 {
        let Ok(u) = self.circuit.unitary(theta) else {
            return f64::NAN;
        };
        let probs = self.data.probabilities(u.entries());
        let probs = match &mut self.shots {
            Some((n, rng)) => match sampled(probs, *n, rng) {
                Ok(p) => p,
                Err(_) => return f64::NAN,
            },
            None => probs,
        };
        classifier_loss(&probs, &self.data.labels, self.convention, self.linear)
    }
}

fn select(ds: &LabeledDataset, idx: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
    (idx.iter().map(|&i| ds.points[i].clone()).collect(), idx.iter().map(|&i| ds.labels[i]).collect())
}

fn rescale_all(map: &RescaleMap, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    points.iter().map(|p| map.rescale(p)).collect()
}

/// Runs one split: encoding (optionally trained), classifier optimization
/// with retries, and evaluation.
pub fn run_trial(ds: &LabeledDataset, config: &ExperimentConfig, seed: u64) -> Result<TrialRecord> {
    config.validate()?;
    let cell = config.cell;
    let split = split_dataset(ds, derive_seed(seed, 1), config.train_fraction)?;
    let (train_raw, train_labels) = select(ds, &split.train);
    let (test_raw, test_labels) = select(ds, &split.test);
    let map = RescaleMap::fit(&train_raw)?;
    let train_x = rescale_all(&map, &train_raw)?;
    let test_x = rescale_all(&map, &test_raw)?;

    let k = ds.num_features();
    let (spec, feature_order, affine, encoding_reports) = match &config.encoding {
        EncodingMode::Fixed(order) => {
            let spec =
                EncodingSpec::new(cell.scheme(), cell.dim(), order.clone())?.with_num_qudits(cell.num_qudits())?;
            (spec, order.clone(), None, None)
        }
        EncodingMode::Optimized => {
            let base = EncodingSpec::identity(cell.scheme(), cell.dim(), k)?.with_num_qudits(cell.num_qudits())?;
            let spsa = SpsaConfig {
                max_iterations: config.encoding_iterations,
                seed: derive_seed(seed, 2),
                ..SpsaConfig::default()
            };
            let mode = match config.shots {
                Some(p) => LossMode::Shots(ShotProtocol { seed: derive_seed(seed, 3), ..p }),
                None => LossMode::Exact,
            };
            let trained = train_encoding(&train_x, &train_labels, NUM_CLASSES, &base, &spsa, mode)?;
            let mut spec = base.with_affine(trained.affine.clone())?;
            let (mut affine, mut report) = (trained.affine, trained.trained);
            if config.encoding_refine && config.shots.is_none() {
                (affine, report) =
                    refine_encoding(&train_x, &train_labels, NUM_CLASSES, &spec, &LbfgsConfig::default())?;
                spec = spec.with_affine(affine.clone())?;
            }
            (spec, (0..k).collect(), Some(affine), Some((trained.initial, report)))
        }
    };
    let train = Encoded::new(&train_x, &train_labels, &spec)?;
    let test = Encoded::new(&test_x, &test_labels, &spec)?;
    let circuit = cell.circuit();
    let convention = cell.convention();

    let mut best: Option<(Vec<f64>, Vec<f64>, f64, f64)> = None;
    let mut retries = 0;
    for attempt in 0..=config.max_retries {
        retries = attempt;
        let opt_seed = derive_seed(seed, 100 + attempt as u64);
        let mut init_rng = stream_rng(opt_seed, 0);
        let init = uniform_angles(circuit.param_count(), &mut init_rng);
        let mut objective = ClassifierObjective {
            circuit: &circuit,
            data: &train,
            convention,
            linear: config.optimizer == ClassifierOptimizer::Rotosolve,
            shots: config.shots.map(|p| (p.shots_per_pair, stream_rng(opt_seed, 1))),
        };
        let outcome = match config.optimizer {
            ClassifierOptimizer::QuasiNewton => {
                quasi_newton_minimize(|t: &[f64]| objective.eval(t), &init, &LbfgsConfig::default())
                    .map(|r| (r.params, r.history))
            }
            ClassifierOptimizer::Rotosolve => {
                let rc =
                    RotosolveConfig { iterations: config.rotosolve_iterations, seed: opt_seed, ..Default::default() };
                rotosolve_minimize(|t: &[f64]| objective.eval(t), &init, &rc).map(|r| (r.params, r.losses))
            }
        };
        let Ok((theta, history)) = outcome else {
            log::debug!("trial {seed}: attempt {attempt} failed");
            continue;
        };
        let u = circuit.unitary(&theta)?;
        let train_acc = accuracy(&train.probabilities(u.entries()), &train.labels, convention);
        let test_acc = accuracy(&test.probabilities(u.entries()), &test.labels, convention);
        let metric = match config.retry_metric {
            RetryMetric::Test => test_acc,
            RetryMetric::Train => train_acc,
        };
        best = Some((theta, history, train_acc, test_acc));
        if metric >= config.retry_threshold {
            break;
        }
    }
    let failed = best.is_none();
    let (theta, loss_history, train_accuracy, test_accuracy) = best.unwrap_or_default();
    Ok(TrialRecord {
        seed,
        split,
        feature_order,
        theta,
        affine,
        encoding_reports,
        train_accuracy,
        test_accuracy,
        retries,
        loss_history,
        failed,
    })
}

/// Test accuracies of one feature ordering across all repetitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub order: Vec<usize>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cell: Cell,
    pub dataset: String,
    pub results: Vec<PermutationResult>,
    /// Five-number summary of the per-ordering mean test accuracies.
    pub summary: FiveNumber,
}

/// Runs every feature ordering of the cell with `config.repetitions`
/// splits each. Trial `t` uses the same split for every ordering.
pub fn run_sweep(ds: &LabeledDataset, config: &ExperimentConfig) -> Result<SweepSummary> {
    let orders = config.cell.orderings(ds.num_features());
    let jobs: Vec<(usize, usize)> =
        (0..orders.len()).flat_map(|o| (0..config.repetitions).map(move |t| (o, t))).collect();
    let records: Vec<Result<TrialRecord>> = jobs
        .par_iter()
        .map(|&(o, t)| {
            let c = ExperimentConfig { encoding: EncodingMode::Fixed(orders[o].clone()), ..config.clone() };
            run_trial(ds, &c, trial_seed(config.seed, t))
        })
        .collect();
    let mut results = Vec::with_capacity(orders.len());
    let mut it = records.into_iter();
    for order in orders {
        let mut accuracies = Vec::with_capacity(config.repetitions);
        let mut failures = 0;
        for r in it.by_ref().take(config.repetitions) {
            let r = r?;
            failures += usize::from(r.failed);
            accuracies.push(r.test_accuracy);
        }
        let (mean, std) = mean_std(&accuracies);
        results.push(PermutationResult { order, accuracies, mean, std, failures });
    }
    let means: Vec<f64> = results.iter().map(|r| r.mean).collect();
    Ok(SweepSummary { cell: config.cell, dataset: ds.name.clone(), summary: five_number_summary(&means)?, results })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizedSummary {
    pub cell: Cell,
    pub dataset: String,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub records: Vec<TrialRecord>,
}

/// Optimized-encoding trials over `config.repetitions` splits.
pub fn run_optimized(ds: &LabeledDataset, config: &ExperimentConfig) -> Result<OptimizedSummary> {
    run_repeated(ds, &ExperimentConfig { encoding: EncodingMode::Optimized, ..config.clone() })
}

/// Trials over `config.repetitions` splits with the configured encoding.
pub fn run_repeated(ds: &LabeledDataset, config: &ExperimentConfig) -> Result<OptimizedSummary> {
    let c = config.clone();
    c.validate()?;
    let records = (0..c.repetitions)
        .into_par_iter()
        .map(|t| run_trial(ds, &c, trial_seed(c.seed, t)))
        .collect::<Result<Vec<_>>>()?;
    let accuracies: Vec<f64> = records.iter().map(|r| r.test_accuracy).collect();
    let (mean, std) = mean_std(&accuracies);
    Ok(OptimizedSummary { cell: c.cell, dataset: ds.name.clone(), accuracies, mean, std, records })
}
