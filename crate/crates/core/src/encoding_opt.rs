//! Training the affine encoding map by minimizing class-density overlaps.
//!
//! Each class `i` is the mixture `ρᵢ` of its encoded training points. The
//! loss `Σ_{i≠j} Tr[ρᵢρⱼ]² − Σᵢ Tr[ρᵢ²]²` rewards separated, pure classes.
//! It is evaluated exactly from statevectors or estimated from sampled
//! pairs of the overlap circuit `U_e†(φ)·U_e(φ′)|0…0⟩`.

use std::cell::{Cell, RefCell};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::{trace_product_raw, DensityAccumulator, DensityMatrix};
use crate::encoding::{Affine, EncodingSpec};
use crate::optim::{quasi_newton_minimize, LbfgsConfig, Spsa, SpsaConfig};
use crate::random::{derive_seed, stream_rng};
use crate::shots::sample_counts_with;
use crate::state::inner;
use crate::{Error, Result};

/// Overlaps and purities of a set of class densities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingLossReport {
    pub loss: f64,
    /// `overlaps[i][j] = Tr[ρᵢρⱼ]`; the diagonal holds the purities.
    pub overlaps: Vec<Vec<f64>>,
    pub purities: Vec<f64>,
}

impl EncodingLossReport {
    /// Builds a report from a symmetric overlap table.
    pub fn from_overlaps(overlaps: Vec<Vec<f64>>) -> Self {
        let purities: Vec<f64> = (0..overlaps.len()).map(|i| overlaps[i][i]).collect();
        let mut report = Self { loss: 0.0, overlaps, purities };
        report.loss = report.recompute_loss();
        report
    }

    /// The loss evaluated from the stored overlaps and purities.
    pub fn recompute_loss(&self) -> f64 {
        let n = self.purities.len();
        let mut cross = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    cross += self.overlaps[i][j].powi(2);
                }
            }
        }
        cross - self.purities.iter().map(|p| p * p).sum::<f64>()
    }

    /// `Σ_{i≠j} Tr[ρᵢρⱼ]²`.
    pub fn cross_term(&self) -> f64 {
        self.recompute_loss() + self.purities.iter().map(|p| p * p).sum::<f64>()
    }

    /// Largest inter-class overlap.
    pub fn max_overlap(&self) -> f64 {
        let n = self.purities.len();
        let mut m = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.max(self.overlaps[i][j]);
                }
            }
        }
        m
    }
}

/// Groups point indices by label, checking every class is present.
pub fn class_members(labels: &[usize], num_classes: usize) -> Result<Vec<Vec<usize>>> {
    let mut members = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        members.get_mut(y).ok_or(Error::InvalidLabel(y))?.push(i);
    }
    if members.iter().any(Vec::is_empty) {
        return Err(Error::Empty("class"));
    }
    Ok(members)
}

fn encoded_amplitudes(points: &[Vec<f64>], spec: &EncodingSpec) -> Result<Vec<Vec<Complex64>>> {
    points
        .iter()
        .map(|x| {
            let angles = spec.slot_angles(x)?;
            if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
                return Err(Error::NonFinite(format!("encoding angle {a}")));
            }
            let mut amps = Vec::new();
            spec.amplitudes_from_slots(&angles, &mut amps);
            Ok(amps)
        })
        .collect()
}

/// One density matrix per class from the encoded (rescaled) points.
pub fn class_densities(
    points: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    spec: &EncodingSpec,
) -> Result<Vec<DensityMatrix>> {
    if points.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), found: labels.len() });
    }
    let members = class_members(labels, num_classes)?;
    let amps = encoded_amplitudes(points, spec)?;
    let dim = spec.dim().pow(spec.num_qudits() as u32);
    members
        .iter()
        .map(|idx| {
            let mut acc = DensityAccumulator::new(dim);
            for &i in idx {
                acc.add(&amps[i]);
            }
            acc.finish()
        })
        .collect()
}

/// Overlap/purity loss of the given class densities.
pub fn encoding_loss(densities: &[DensityMatrix]) -> Result<EncodingLossReport> {
    if densities.len() < 2 {
        return Err(Error::Config("the encoding loss needs at least two classes".into()));
    }
    let dim = densities[0].dim();
    if let Some(d) = densities.iter().find(|d| d.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: d.dim() });
    }
    let n = densities.len();
    let mut overlaps = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let t = trace_product_raw(densities[i].entries(), densities[j].entries()).re;
            overlaps[i][j] = t;
            overlaps[j][i] = t;
        }
    }
    Ok(EncodingLossReport::from_overlaps(overlaps))
}

/// Pair-sampling protocol for the shot-based overlap estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotProtocol {
    pub pair_samples: usize,
    pub shots_per_pair: u64,
    pub seed: u64,
}

impl Default for ShotProtocol {
    fn default() -> Self {
        Self { pair_samples: 500, shots_per_pair: 10, seed: 0 }
    }
}

impl ShotProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.pair_samples == 0 || self.shots_per_pair == 0 {
            return Err(Error::Config("pair samples and shots per pair must be positive".into()));
        }
        Ok(())
    }
}

/// Probability of the all-zero outcome of `U_e†(φ)·U_e(φ′)|0…0⟩`, i.e.
/// `|⟨ψ(φ)|ψ(φ′)⟩|²`.
pub fn overlap_zero_probability(a: &[Complex64], b: &[Complex64]) -> f64 {
    inner(a, b).norm_sqr().min(1.0)
}

fn estimate_from_amplitudes<R: Rng + ?Sized>(
    first: &[&[Complex64]],
    second: &[&[Complex64]],
    protocol: &ShotProtocol,
    rng: &mut R,
) -> Result<f64> {
    let mut zeros = 0u64;
    for _ in 0..protocol.pair_samples {
        let a = first[rng.gen_range(0..first.len())];
        let b = second[rng.gen_range(0..second.len())];
        let p = overlap_zero_probability(a, b);
        zeros += sample_counts_with(&[p, 1.0 - p], protocol.shots_per_pair, rng)?[0];
    }
    Ok(zeros as f64 / (protocol.pair_samples as u64 * protocol.shots_per_pair) as f64)
}

/// Shot-based estimate of `Tr[ρᵢρⱼ]` from two classes' rescaled points:
/// the all-zero frequency of the overlap circuit averaged over uniformly
/// drawn pairs.
pub fn overlap_estimate_shots(
    class_i: &[Vec<f64>],
    class_j: &[Vec<f64>],
    spec: &EncodingSpec,
    protocol: &ShotProtocol,
) -> Result<f64> {
    protocol.validate()?;
    if class_i.is_empty() || class_j.is_empty() {
        return Err(Error::Empty("class"));
    }
    let a = encoded_amplitudes(class_i, spec)?;
    let b = encoded_amplitudes(class_j, spec)?;
    let ar: Vec<&[Complex64]> = a.iter().map(Vec::as_slice).collect();
    let br: Vec<&[Complex64]> = b.iter().map(Vec::as_slice).collect();
    let mut rng = stream_rng(protocol.seed, 0);
    estimate_from_amplitudes(&ar, &br, protocol, &mut rng)
}

/// Shot-based loss report. Class pair `(i, j)` uses its own stream of
/// `protocol.seed`.
pub fn encoding_loss_shots(
    points: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    spec: &EncodingSpec,
    protocol: &ShotProtocol,
) -> Result<EncodingLossReport> {
    protocol.validate()?;
    let members = class_members(labels, num_classes)?;
    let amps = encoded_amplitudes(points, spec)?;
    let groups: Vec<Vec<&[Complex64]>> =
        members.iter().map(|idx| idx.iter().map(|&i| amps[i].as_slice()).collect()).collect();
    let n = num_classes;
    let mut overlaps = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let mut rng = stream_rng(protocol.seed, (i * n + j) as u64);
            let t = estimate_from_amplitudes(&groups[i], &groups[j], protocol, &mut rng)?;
            overlaps[i][j] = t;
            overlaps[j][i] = t;
        }
    }
    Ok(EncodingLossReport::from_overlaps(overlaps))
}

/// How the loss is evaluated during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossMode {
    Exact,
    /// Every evaluation draws fresh pairs and shots from a derived seed.
    Shots(ShotProtocol),
}

/// One loss evaluation during encoding training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub iteration: usize,
    pub evaluation: usize,
    pub report: EncodingLossReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingTrainResult {
    pub affine: Affine,
    pub trajectory: Vec<TrajectoryRecord>,
    /// Exact report at `W = I, b = 0`.
    pub initial: EncodingLossReport,
    /// Exact report at the trained map.
    pub trained: EncodingLossReport,
    pub calibration_evaluations: usize,
}

/// Trains `(W, b)` with SPSA starting from `W = I, b = 0`. `spec` supplies
/// the scheme, dimension and gate realization; any affine map it already
/// holds is replaced.
pub fn train_encoding(
    points: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    spec: &EncodingSpec,
    spsa: &SpsaConfig,
    mode: LossMode,
) -> Result<EncodingTrainResult> {
    let k = spec.num_features();
    let base = EncodingSpec::identity(spec.scheme(), spec.dim(), k)?
        .with_num_qudits(spec.num_qudits())?
        .with_gates(spec.gates())?;
    let with_params = |p: &[f64]| -> Result<EncodingSpec> { base.clone().with_affine(Affine::from_params(k, p)?) };
    let exact = |p: &[f64]| -> Result<EncodingLossReport> {
        encoding_loss(&class_densities(points, labels, num_classes, &with_params(p)?)?)
    };

    let init = Affine::identity(k).to_params();
    let initial = exact(&init)?;
    let trajectory = RefCell::new(Vec::new());
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let iteration = Cell::new(0usize);
    let evaluation = Cell::new(0usize);
    let mut objective = |p: &[f64]| -> f64 {
        let n = evaluation.get();
        evaluation.set(n + 1);
        let report = match mode {
            LossMode::Exact => exact(p),
            LossMode::Shots(protocol) => with_params(p).and_then(|s| {
                let seeded = ShotProtocol { seed: derive_seed(protocol.seed, n as u64), ..protocol };
                encoding_loss_shots(points, labels, num_classes, &s, &seeded)
            }),
        };
        match report {
            Ok(r) => {
                let loss = r.loss;
                trajectory.borrow_mut().push(TrajectoryRecord { iteration: iteration.get(), evaluation: n, report: r });
                loss
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };

    let mut params = init.clone();
    let mut stepper = Spsa::new(spsa.clone())?;
    let mut calibration_evaluations = 0;
    if spsa.max_iterations > 0 && spsa.a.is_none() {
        calibration_evaluations = stepper.calibrate(&mut objective, &params);
        trajectory.borrow_mut().clear();
    }
    for k in 0..spsa.max_iterations {
        iteration.set(k);
        let (fp, fm) = stepper.step(&mut objective, &mut params);
        if !(fp.is_finite() && fm.is_finite()) {
            let detail =
                failure.borrow_mut().take().map(|e| e.to_string()).unwrap_or_else(|| format!("loss {fp}, {fm}"));
            return Err(Error::NonFinite(format!("encoding loss at iteration {k}: {detail}")));
        }
    }
    let trajectory = trajectory.into_inner();
    let affine = Affine::from_params(k, &params)?;
    let trained = exact(&params)?;
    Ok(EncodingTrainResult { affine, trajectory, initial, trained, calibration_evaluations })
}

/// Continues from the affine map held by `spec` with quasi-Newton steps on
/// the exact loss. Returns the refined map and its exact report.
pub fn refine_encoding(
    points: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    spec: &EncodingSpec,
    config: &LbfgsConfig,
) -> Result<(Affine, EncodingLossReport)> {
    let k = spec.num_features();
    let with_params = |p: &[f64]| -> Result<EncodingSpec> { spec.clone().with_affine(Affine::from_params(k, p)?) };
    let exact = |p: &[f64]| -> Result<EncodingLossReport> {
        encoding_loss(&class_densities(points, labels, num_classes, &with_params(p)?)?)
    };
    let init = spec.affine().cloned().unwrap_or_else(|| Affine::identity(k)).to_params();
    let result = quasi_newton_minimize(|p: &[f64]| exact(p).map_or(f64::NAN, |r| r.loss), &init, config)?;
    let report = exact(&result.params)?;
    Ok((Affine::from_params(k, &result.params)?, report))
}

/// Matrix of all pairwise `|⟨ψ|ψ′⟩|²` between two point sets; its mean is
/// `Tr[ρᵢρⱼ]`.
pub fn pairwise_overlaps(first: &[Vec<f64>], second: &[Vec<f64>], spec: &EncodingSpec) -> Result<DMatrix<f64>> {
    let a = encoded_amplitudes(first, spec)?;
    let b = encoded_amplitudes(second, spec)?;
    Ok(DMatrix::from_fn(a.len(), b.len(), |r, c| overlap_zero_probability(&a[r], &b[c])))
}
