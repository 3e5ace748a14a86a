use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trial::{accuracy, sampled, ClassifierObjective, Encoded};
use super::{mean_std, split_dataset, Convention, LabeledDataset, Split, NUM_CLASSES};
use crate::ansatz::ttn_one_qudit;
use crate::circuit::ParamCircuit;
use crate::encoding::{Affine, EncodingGates, EncodingSpec, RescaleMap, Scheme};
use crate::encoding_opt::{train_encoding, EncodingLossReport, LossMode, ShotProtocol, TrajectoryRecord};
use crate::optim::{rotosolve_minimize, RotosolveConfig, SpsaConfig};
use crate::random::{derive_seed, stream_rng, uniform_angles};
use crate::{Error, Result};

/// One-qutrit pipeline with shot-estimated encoding training and rotosolve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwareConfig {
    pub seeds: usize,
    pub master_seed: u64,
    pub train_fraction: f64,
    pub encoding_iterations: usize,
    /// Pair sampling for the overlap estimate; its seed is replaced per run.
    pub protocol: ShotProtocol,
    pub rotosolve_iterations: usize,
    pub samples_per_sweep: usize,
    /// Shots per training point in each loss evaluation.
    pub training_shots: u64,
    /// Shots per point when measuring accuracy.
    pub evaluation_shots: u64,
    /// Use exact probabilities and the exact encoding loss instead of shots.
    pub exact: bool,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        Self {
            seeds: 8,
            master_seed: 0,
            train_fraction: 2.0 / 3.0,
            encoding_iterations: 100,
            protocol: ShotProtocol::default(),
            rotosolve_iterations: 32,
            samples_per_sweep: 16,
            training_shots: 10,
            evaluation_shots: 500,
            exact: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwareRun {
    pub seed: u64,
    pub split: Split,
    pub affine: Affine,
    pub encoding_trajectory: Vec<TrajectoryRecord>,
    /// Exact encoding loss at `W = I, b = 0` and after training.
    pub encoding_initial: EncodingLossReport,
    pub encoding_trained: EncodingLossReport,
    /// Classifier loss before training and after each rotosolve iteration.
    pub classifier_losses: Vec<f64>,
    pub sweep_order: Vec<usize>,
    /// Accuracies before training and after each rotosolve iteration.
    pub train_accuracy: Vec<f64>,
    pub test_accuracy: Vec<f64>,
    pub theta: Vec<f64>,
}

/// Mean, sample standard deviation and envelope across runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationBand {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl IterationBand {
    fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { mean, std, min, max }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwareSummary {
    pub runs: Vec<HardwareRun>,
    pub train_band: Vec<IterationBand>,
    pub test_band: Vec<IterationBand>,
    /// Per SPSA iteration: the encoding loss averaged over its two
    /// evaluations, then banded across runs.
    pub encoding_loss_band: Vec<IterationBand>,
    pub purity_bands: Vec<Vec<IterationBand>>,
    /// Pairs (0,1), (1,2), (0,2).
    pub overlap_bands: Vec<Vec<IterationBand>>,
}

/// Accuracy and loss of one run at one rotosolve iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub seed: u64,
    pub iteration: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

impl HardwareSummary {
    /// One record per run and iteration, iteration 0 being the initial point.
    pub fn iteration_records(&self) -> Vec<IterationRecord> {
        self.runs
            .iter()
            .flat_map(|r| {
                (0..r.test_accuracy.len()).map(move |i| IterationRecord {
                    seed: r.seed,
                    iteration: i,
                    loss: r.classifier_losses[i],
                    train_accuracy: r.train_accuracy[i],
                    test_accuracy: r.test_accuracy[i],
                })
            })
            .collect()
    }
}

const OVERLAP_PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (0, 2)];

fn bands(runs: &[Vec<f64>]) -> Vec<IterationBand> {
    let len = runs.iter().map(Vec::len).min().unwrap_or(0);
    (0..len).map(|i| IterationBand::of(&runs.iter().map(|r| r[i]).collect::<Vec<_>>())).collect()
}

fn per_iteration(trajectory: &[TrajectoryRecord], f: impl Fn(&EncodingLossReport) -> f64) -> Vec<f64> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for rec in trajectory {
        if out.len() <= rec.iteration {
            out.resize(rec.iteration + 1, (0.0, 0));
        }
        out[rec.iteration].0 += f(&rec.report);
        out[rec.iteration].1 += 1;
    }
    out.into_iter().map(|(s, n)| s / n.max(1) as f64).collect()
}

fn evaluate(
    circuit: &ParamCircuit,
    theta: &[f64],
    data: &Encoded,
    shots: Option<u64>,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let u = circuit.unitary(theta)?;
    let mut probs = data.probabilities(u.entries());
    if let Some(n) = shots {
        probs = sampled(probs, n, rng)?;
    }
    Ok(accuracy(&probs, &data.labels, Convention::OneQutrit))
}

fn run_one(ds: &LabeledDataset, config: &HardwareConfig, seed: u64) -> Result<HardwareRun> {
    let split = split_dataset(ds, derive_seed(seed, 1), config.train_fraction)?;
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
        (idx.iter().map(|&i| ds.points[i].clone()).collect(), idx.iter().map(|&i| ds.labels[i]).collect())
    };
    let (train_raw, train_labels) = pick(&split.train);
    let (test_raw, test_labels) = pick(&split.test);
    let map = RescaleMap::fit(&train_raw)?;
    let train_x: Vec<Vec<f64>> = train_raw.iter().map(|p| map.rescale(p)).collect::<Result<_>>()?;
    let test_x: Vec<Vec<f64>> = test_raw.iter().map(|p| map.rescale(p)).collect::<Result<_>>()?;

    let base = EncodingSpec::identity(Scheme::Nce, 3, ds.num_features())?.with_gates(EncodingGates::Hardware)?;
    let spsa =
        SpsaConfig { max_iterations: config.encoding_iterations, seed: derive_seed(seed, 2), ..SpsaConfig::default() };
    let mode = if config.exact {
        LossMode::Exact
    } else {
        LossMode::Shots(ShotProtocol { seed: derive_seed(seed, 3), ..config.protocol })
    };
    let enc = train_encoding(&train_x, &train_labels, NUM_CLASSES, &base, &spsa, mode)?;
    let spec = base.with_affine(enc.affine.clone())?;
    let train = Encoded::new(&train_x, &train_labels, &spec)?;
    let test = Encoded::new(&test_x, &test_labels, &spec)?;

    let circuit = ttn_one_qudit(3)?;
    let init = uniform_angles(circuit.param_count(), &mut stream_rng(derive_seed(seed, 4), 0));
    let mut objective = ClassifierObjective {
        circuit: &circuit,
        data: &train,
        convention: Convention::OneQutrit,
        linear: true,
        shots: (!config.exact).then(|| (config.training_shots, stream_rng(derive_seed(seed, 5), 0))),
    };
    let rc = RotosolveConfig {
        samples_per_sweep: config.samples_per_sweep,
        iterations: config.rotosolve_iterations,
        seed: derive_seed(seed, 6),
    };
    let roto = rotosolve_minimize(|t: &[f64]| objective.eval(t), &init, &rc)?;

    let eval_shots = (!config.exact).then_some(config.evaluation_shots);
    let mut eval_rng = stream_rng(derive_seed(seed, 7), 0);
    let mut train_accuracy = Vec::with_capacity(roto.param_history.len() + 1);
    let mut test_accuracy = Vec::with_capacity(roto.param_history.len() + 1);
    for theta in std::iter::once(&init).chain(&roto.param_history) {
        train_accuracy.push(evaluate(&circuit, theta, &train, eval_shots, &mut eval_rng)?);
        test_accuracy.push(evaluate(&circuit, theta, &test, eval_shots, &mut eval_rng)?);
    }
    Ok(HardwareRun {
        seed,
        split,
        affine: enc.affine,
        encoding_trajectory: enc.trajectory,
        encoding_initial: enc.initial,
        encoding_trained: enc.trained,
        classifier_losses: roto.losses,
        sweep_order: roto.order,
        train_accuracy,
        test_accuracy,
        theta: roto.params,
    })
}

/// Runs the pipeline for `config.seeds` seeds and aggregates the curves.
pub fn run_hardware_protocol(ds: &LabeledDataset, config: &HardwareConfig) -> Result<HardwareSummary> {
    if config.seeds == 0 {
        return Err(Error::Config("at least one seed is required".into()));
    }
    if ds.num_features() != 4 {
        return Err(Error::Config("the one-qutrit pipeline encodes exactly four features".into()));
    }
    config.protocol.validate()?;
    let runs = (0..config.seeds)
        .into_par_iter()
        .map(|s| run_one(ds, config, derive_seed(config.master_seed, s as u64)))
        .collect::<Result<Vec<_>>>()?;
    let train_band = bands(&runs.iter().map(|r| r.train_accuracy.clone()).collect::<Vec<_>>());
    let test_band = bands(&runs.iter().map(|r| r.test_accuracy.clone()).collect::<Vec<_>>());
    let traj = |f: &dyn Fn(&EncodingLossReport) -> f64| -> Vec<IterationBand> {
        bands(&runs.iter().map(|r| per_iteration(&r.encoding_trajectory, f)).collect::<Vec<_>>())
    };
    let encoding_loss_band = traj(&|r| r.loss);
    let purity_bands = (0..NUM_CLASSES).map(|c| traj(&move |r: &EncodingLossReport| r.purities[c])).collect();
    let overlap_bands =
        OVERLAP_PAIRS.iter().map(|&(i, j)| traj(&move |r: &EncodingLossReport| r.overlaps[i][j])).collect();
    Ok(HardwareSummary { runs, train_band, test_band, encoding_loss_band, purity_bands, overlap_bands })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn blobs() -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3 {
            for _ in 0..15 {
                points.push((0..4).map(|_| c as f64 * 2.0 + rng.gen_range(-0.5..0.5)).collect());
                labels.push(c);
            }
        }
        LabeledDataset::new("blobs", vec!["a".into(), "b".into(), "c".into(), "d".into()], points, labels).unwrap()
    }

    #[test]
    fn small_protocol_shapes() {
        let config = HardwareConfig {
            seeds: 2,
            encoding_iterations: 5,
            protocol: ShotProtocol { pair_samples: 50, shots_per_pair: 10, seed: 0 },
            rotosolve_iterations: 8,
            ..HardwareConfig::default()
        };
        let s = run_hardware_protocol(&blobs(), &config).unwrap();
        assert_eq!(s.runs.len(), 2);
        assert_eq!(s.test_band.len(), 9);
        assert_eq!(s.encoding_loss_band.len(), 5);
        assert_eq!(s.overlap_bands.len(), 3);
        assert_eq!(s.iteration_records().len(), 18);
        for r in &s.runs {
            assert_eq!(r.encoding_trajectory.len(), 10);
            assert!(r.test_accuracy.iter().all(|a| (0.0..=1.0).contains(a)));
        }
        assert_eq!(s, run_hardware_protocol(&blobs(), &config).unwrap());
    }

    #[test]
    fn exact_mode_loss_is_monotone() {
        let config = HardwareConfig { seeds: 1, encoding_iterations: 5, exact: true, ..HardwareConfig::default() };
        let s = run_hardware_protocol(&blobs(), &config).unwrap();
        for w in s.runs[0].classifier_losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }
}
