//! Product-state feature encodings for qudits.
//!
//! Pipeline: raw features → [`RescaleMap`] to [π/4, 3π/4] → feature order
//! (fixed encodings) or affine map `φ = W·x + b` (optimized encodings) →
//! per-qudit scheme amplitudes.
//!
//! * NAE stores `d−1` features per qudit in amplitudes via nested sines and
//!   cosines.
//! * NPE stores `d−1` features per qudit as relative phases on a uniform
//!   superposition.
//! * NCE combines both and stores `2(d−1)` features per qudit.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{Angle, GateKind, ParamCircuit};
use crate::gates::GateTag;
use crate::state::QuditState;
use crate::{Error, Result};

/// Angle given to encoding slots that receive no feature.
pub const UNUSED_SLOT_ANGLE: f64 = FRAC_PI_4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Nae,
    Npe,
    Nce,
}

impl Scheme {
    /// Features stored per qudit.
    pub fn capacity(self, dim: usize) -> usize {
        match self {
            Scheme::Nae | Scheme::Npe => dim - 1,
            Scheme::Nce => 2 * (dim - 1),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Nae => "nae",
            Scheme::Npe => "npe",
            Scheme::Nce => "nce",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nae" => Ok(Scheme::Nae),
            "npe" => Ok(Scheme::Npe),
            "nce" => Ok(Scheme::Nce),
            _ => Err(Error::Parse(format!("unknown encoding scheme `{s}`"))),
        }
    }
}

/// ⌈K / capacity⌉ qudits.
pub fn qudits_required(scheme: Scheme, dim: usize, num_features: usize) -> usize {
    let cap = scheme.capacity(dim);
    num_features.div_ceil(cap)
}

/// Per-feature affine map from fitted `(min, max)` onto [π/4, 3π/4].
/// Values outside the fitted range extrapolate linearly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaleMap {
    ranges: Vec<(f64, f64)>,
}

impl RescaleMap {
    pub fn new(ranges: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(lo, hi)) in ranges.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Config(format!("degenerate range ({lo}, {hi}) for feature {i}")));
            }
        }
        Ok(Self { ranges })
    }

    /// Fits per-feature min/max over `points`.
    pub fn fit<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let first = points.first().ok_or(Error::Empty("rescale fit points"))?.as_ref();
        let mut ranges: Vec<(f64, f64)> = first.iter().map(|&v| (v, v)).collect();
        for p in points {
            let p = p.as_ref();
            if p.len() != ranges.len() {
                return Err(Error::DimensionMismatch { expected: ranges.len(), found: p.len() });
            }
            for (r, &v) in ranges.iter_mut().zip(p) {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        Self::new(ranges)
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    pub fn rescale(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.ranges.len() {
            return Err(Error::DimensionMismatch { expected: self.ranges.len(), found: raw.len() });
        }
        Ok(raw.iter().zip(&self.ranges).map(|(&v, &(lo, hi))| FRAC_PI_4 + (v - lo) / (hi - lo) * FRAC_PI_2).collect())
    }
}

/// Trainable encoding map `φ = W·x + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Affine {
    pub fn identity(k: usize) -> Self {
        Self { weights: DMatrix::identity(k, k), bias: DVector::zeros(k) }
    }

    pub fn new(weights: DMatrix<f64>, bias: DVector<f64>) -> Result<Self> {
        let k = bias.len();
        if weights.nrows() != k || weights.ncols() != k {
            return Err(Error::DimensionMismatch { expected: k, found: weights.nrows().max(weights.ncols()) });
        }
        Ok(Self { weights, bias })
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    /// Flattened parameters: `W` row-major, then `b`.
    pub fn to_params(&self) -> Vec<f64> {
        let k = self.dim();
        let mut out = Vec::with_capacity(k * k + k);
        for r in 0..k {
            for c in 0..k {
                out.push(self.weights[(r, c)]);
            }
        }
        out.extend(self.bias.iter());
        out
    }

    pub fn from_params(k: usize, params: &[f64]) -> Result<Self> {
        if params.len() != k * k + k {
            return Err(Error::DimensionMismatch { expected: k * k + k, found: params.len() });
        }
        Ok(Self {
            weights: DMatrix::from_row_slice(k, k, &params[..k * k]),
            bias: DVector::from_column_slice(&params[k * k..]),
        })
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        affine_features(x, &self.weights, &self.bias)
    }
}

/// `φ = W·x + b` without any range restriction.
pub fn affine_features(x: &[f64], weights: &DMatrix<f64>, bias: &DVector<f64>) -> Result<Vec<f64>> {
    let k = x.len();
    if weights.nrows() != k || weights.ncols() != k {
        return Err(Error::DimensionMismatch { expected: k, found: weights.ncols() });
    }
    if bias.len() != k {
        return Err(Error::DimensionMismatch { expected: k, found: bias.len() });
    }
    Ok((0..k).map(|r| bias[r] + (0..k).map(|c| weights[(r, c)] * x[c]).sum::<f64>()).collect())
}

/// Gate realization of the encoding circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EncodingGates {
    /// Subspace Y rotations, Fourier gate and level phases.
    #[default]
    Standard,
    /// Qutrit NCE via `Z2·Z1·X′12·X′01`, the transmon-native sequence.
    Hardware,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    scheme: Scheme,
    dim: usize,
    feature_order: Vec<usize>,
    num_qudits: usize,
    affine: Option<Affine>,
    gates: EncodingGates,
}

impl EncodingSpec {
    /// Encodes `raw[feature_order[k]]` into slot `k`. `feature_order` may
    /// select a subset of the raw features.
    pub fn new(scheme: Scheme, dim: usize, feature_order: Vec<usize>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!("qudit dimension must be at least 2, got {dim}")));
        }
        if feature_order.is_empty() {
            return Err(Error::Empty("feature order"));
        }
        for (i, f) in feature_order.iter().enumerate() {
            if feature_order[..i].contains(f) {
                return Err(Error::Config(format!("feature {f} appears twice in the order")));
            }
        }
        let num_qudits = qudits_required(scheme, dim, feature_order.len());
        Ok(Self { scheme, dim, feature_order, num_qudits, affine: None, gates: EncodingGates::Standard })
    }

    /// Identity order over `k` features.
    pub fn identity(scheme: Scheme, dim: usize, k: usize) -> Result<Self> {
        Self::new(scheme, dim, (0..k).collect())
    }

    /// Uses `num_qudits` qudits instead of the minimum.
    pub fn with_num_qudits(mut self, num_qudits: usize) -> Result<Self> {
        let required = qudits_required(self.scheme, self.dim, self.feature_order.len());
        if num_qudits < required {
            return Err(Error::Config(format!(
                "{} features need {required} qudits for {} with d={}, got {num_qudits}",
                self.feature_order.len(),
                self.scheme,
                self.dim
            )));
        }
        self.num_qudits = num_qudits;
        Ok(self)
    }

    /// Switches to optimized-encoding mode. The feature order must be the
    /// identity, since `W` absorbs any reordering.
    pub fn with_affine(mut self, affine: Affine) -> Result<Self> {
        if self.feature_order.iter().enumerate().any(|(i, &f)| i != f) {
            return Err(Error::Config("optimized encoding requires the identity feature order".into()));
        }
        if affine.dim() != self.feature_order.len() {
            return Err(Error::DimensionMismatch { expected: self.feature_order.len(), found: affine.dim() });
        }
        self.affine = Some(affine);
        Ok(self)
    }

    pub fn with_gates(mut self, gates: EncodingGates) -> Result<Self> {
        if gates == EncodingGates::Hardware && !(self.scheme == Scheme::Nce && self.dim == 3) {
            return Err(Error::Config("hardware encoding gates exist only for qutrit NCE".into()));
        }
        self.gates = gates;
        Ok(self)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_qudits(&self) -> usize {
        self.num_qudits
    }

    pub fn num_features(&self) -> usize {
        self.feature_order.len()
    }

    pub fn feature_order(&self) -> &[usize] {
        &self.feature_order
    }

    pub fn affine(&self) -> Option<&Affine> {
        self.affine.as_ref()
    }

    pub fn gates(&self) -> EncodingGates {
        self.gates
    }

    pub fn capacity(&self) -> usize {
        self.scheme.capacity(self.dim)
    }

    /// Total number of encoding slots, `capacity × num_qudits`.
    pub fn slot_count(&self) -> usize {
        self.capacity() * self.num_qudits
    }

    /// Gate angles for a rescaled feature vector, padded with
    /// [`UNUSED_SLOT_ANGLE`].
    pub fn slot_angles(&self, rescaled: &[f64]) -> Result<Vec<f64>> {
        let mut selected = Vec::with_capacity(self.feature_order.len());
        for &f in &self.feature_order {
            let v = *rescaled.get(f).ok_or(Error::DimensionMismatch { expected: f + 1, found: rescaled.len() })?;
            selected.push(v);
        }
        let mut angles = match &self.affine {
            Some(a) => a.apply(&selected)?,
            None => selected,
        };
        angles.resize(self.slot_count(), UNUSED_SLOT_ANGLE);
        Ok(angles)
    }

    /// Writes the encoded amplitudes for precomputed slot angles into `out`.
    pub(crate) fn amplitudes_from_slots(&self, angles: &[f64], out: &mut Vec<Complex64>) {
        let cap = self.capacity();
        out.clear();
        out.push(Complex64::new(1.0, 0.0));
        let mut qudit = vec![Complex64::new(0.0, 0.0); self.dim];
        for q in 0..self.num_qudits {
            qudit_amplitudes(self.scheme, self.gates, self.dim, &angles[q * cap..(q + 1) * cap], &mut qudit);
            let prev = std::mem::take(out);
            out.reserve(prev.len() * self.dim);
            for a in &prev {
                out.extend(qudit.iter().map(|b| a * b));
            }
        }
    }
}

/// Amplitudes of one qudit for its `capacity` slot angles.
fn qudit_amplitudes(scheme: Scheme, gates: EncodingGates, dim: usize, a: &[f64], out: &mut [Complex64]) {
    if gates == EncodingGates::Hardware {
        // Z2(a3)·Z1(a2)·X′12(a1)·X′01(a0)|0⟩.
        let g = Complex64::from_polar(1.0, 0.5 * a[0]);
        let h = Complex64::from_polar(1.0, 0.5 * (a[0] + a[1]));
        let (c0, s0) = ((0.5 * a[0]).cos(), (0.5 * a[0]).sin());
        let (c1, s1) = ((0.5 * a[1]).cos(), (0.5 * a[1]).sin());
        out[0] = g * c0;
        out[1] = h * Complex64::new(0.0, -s0 * c1) * Complex64::from_polar(1.0, a[2]);
        out[2] = h * Complex64::new(-s0 * s1, 0.0) * Complex64::from_polar(1.0, a[3]);
        return;
    }
    match scheme {
        Scheme::Npe => {
            let norm = 1.0 / (dim as f64).sqrt();
            out[0] = Complex64::new(norm, 0.0);
            for j in 1..dim {
                out[j] = Complex64::from_polar(norm, a[j - 1]);
            }
        }
        Scheme::Nae | Scheme::Nce => {
            let mut prefix = 1.0;
            for j in 0..dim - 1 {
                out[j] = Complex64::new(prefix * a[j].cos(), 0.0);
                prefix *= a[j].sin();
            }
            out[dim - 1] = Complex64::new(prefix, 0.0);
            if scheme == Scheme::Nce {
                for j in 1..dim {
                    out[j] *= Complex64::from_polar(1.0, a[dim - 2 + j]);
                }
            }
        }
    }
}

/// Product state encoding the rescaled features.
pub fn encode_state(rescaled: &[f64], spec: &EncodingSpec) -> Result<QuditState> {
    let angles = spec.slot_angles(rescaled)?;
    for a in &angles {
        if !a.is_finite() {
            return Err(Error::NonFinite(format!("encoding angle {a}")));
        }
    }
    let mut amps = Vec::new();
    spec.amplitudes_from_slots(&angles, &mut amps);
    Ok(QuditState::from_trusted(spec.dim, spec.num_qudits, amps))
}

/// Circuit whose parameters are the slot angles (see
/// [`EncodingSpec::slot_angles`]); applied to |0…0⟩ it prepares the
/// encoded state up to a global phase.
pub fn encoding_circuit(spec: &EncodingSpec) -> Result<ParamCircuit> {
    let d = spec.dim;
    let cap = spec.capacity();
    let mut c = ParamCircuit::new(d, spec.num_qudits, spec.slot_count());
    let named_ry = |lower: usize| match (d, lower) {
        (2, 0) => Some(GateTag::Ry),
        (3, 0) => Some(GateTag::Ry01),
        (3, 1) => Some(GateTag::Ry12),
        _ => None,
    };
    let named_phase = |level: usize| match (d, level) {
        (2, 1) => Some(GateTag::Zphase),
        (3, 1) => Some(GateTag::Z1),
        (3, 2) => Some(GateTag::Z2),
        _ => None,
    };
    for q in 0..spec.num_qudits {
        let base = q * cap;
        if spec.gates == EncodingGates::Hardware {
            c.param(GateTag::Xp01, base, q)?;
            c.param(GateTag::Xp12, base + 1, q)?;
            c.param(GateTag::Z1, base + 2, q)?;
            c.param(GateTag::Z2, base + 3, q)?;
            continue;
        }
        let ry_chain = |c: &mut ParamCircuit| -> Result<()> {
            for j in 0..d - 1 {
                let kind = named_ry(j).map(GateKind::Named).unwrap_or(GateKind::SubspaceRy { lower: j, upper: j + 1 });
                c.push(kind, Angle::Param { slot: base + j, scale: 2.0 }, &[q])?;
            }
            Ok(())
        };
        let phase = |c: &mut ParamCircuit, level: usize, slot: usize| -> Result<()> {
            let kind = named_phase(level).map(GateKind::Named).unwrap_or(GateKind::LevelPhase { level });
            c.push(kind, Angle::Param { slot, scale: 1.0 }, &[q])?;
            Ok(())
        };
        match spec.scheme {
            Scheme::Nae => ry_chain(&mut c)?,
            Scheme::Npe => {
                let h = match d {
                    2 => GateKind::Named(GateTag::H),
                    3 => GateKind::Named(GateTag::H3),
                    _ => GateKind::Hadamard,
                };
                c.push(h, Angle::None, &[q])?;
                for level in 1..d {
                    phase(&mut c, level, base + level - 1)?;
                }
            }
            Scheme::Nce => {
                ry_chain(&mut c)?;
                for level in 1..d {
                    phase(&mut c, level, base + d - 2 + level)?;
                }
            }
        }
    }
    Ok(c)
}

/// Runs [`encoding_circuit`] on |0…0⟩.
pub fn encode_via_circuit(rescaled: &[f64], spec: &EncodingSpec) -> Result<QuditState> {
    let circuit = encoding_circuit(spec)?;
    let angles = spec.slot_angles(rescaled)?;
    circuit.apply(&QuditState::zero(spec.dim, spec.num_qudits)?, &angles)
}
