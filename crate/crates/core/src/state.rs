//! Dense statevectors over `N` qudits of dimension `d`.
//!
//! Basis indices are big-endian: qudit 0 is the most significant digit.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::unitary::UnitaryMatrix;
use crate::{Error, Result, ALGEBRAIC_TOL};

#[derive(Clone, Debug, PartialEq)]
pub struct QuditState {
    dim: usize,
    num_qudits: usize,
    amplitudes: Vec<Complex64>,
}

impl QuditState {
    /// Builds a state from raw amplitudes, which must already be normalized.
    pub fn new(dim: usize, num_qudits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_register(dim, num_qudits)?;
        let expected = dim.pow(num_qudits as u32);
        if amplitudes.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: amplitudes.len() });
        }
        let norm = norm_sqr(&amplitudes).sqrt();
        if !((norm - 1.0).abs() <= ALGEBRAIC_TOL) {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { dim, num_qudits, amplitudes })
    }

    /// Normalizes `amplitudes` before wrapping them.
    pub fn from_unnormalized(dim: usize, num_qudits: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = norm_sqr(&amplitudes).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NotNormalized(norm));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Self::new(dim, num_qudits, amplitudes)
    }

    pub(crate) fn from_trusted(dim: usize, num_qudits: usize, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), dim.pow(num_qudits as u32));
        Self { dim, num_qudits, amplitudes }
    }

    /// The computational basis state `|digits⟩`.
    pub fn basis(dim: usize, digits: &[usize]) -> Result<Self> {
        check_register(dim, digits.len())?;
        let mut index = 0;
        for &digit in digits {
            if digit >= dim {
                return Err(Error::DimensionMismatch { expected: dim, found: digit });
            }
            index = index * dim + digit;
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim.pow(digits.len() as u32)];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { dim, num_qudits: digits.len(), amplitudes })
    }

    pub fn zero(dim: usize, num_qudits: usize) -> Result<Self> {
        Self::basis(dim, &vec![0; num_qudits])
    }

    /// Tensor product `self ⊗ other`.
    pub fn tensor(&self, other: &QuditState) -> Result<QuditState> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let mut amplitudes = Vec::with_capacity(self.amplitudes.len() * other.amplitudes.len());
        for a in &self.amplitudes {
            amplitudes.extend(other.amplitudes.iter().map(|b| a * b));
        }
        Ok(Self::from_trusted(self.dim, self.num_qudits + other.num_qudits, amplitudes))
    }

    pub fn dim_per_qudit(&self) -> usize {
        self.dim
    }

    pub fn num_qudits(&self) -> usize {
        self.num_qudits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amplitudes).sqrt()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &QuditState) -> Result<Complex64> {
        if self.amplitudes.len() != other.amplitudes.len() {
            return Err(Error::DimensionMismatch { expected: self.amplitudes.len(), found: other.amplitudes.len() });
        }
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }

    /// |⟨self|other⟩|².
    pub fn fidelity(&self, other: &QuditState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Applies `gate` to the listed qudits; the first target is the most
    /// significant digit of the gate's own basis.
    pub fn apply_gate(&self, gate: &UnitaryMatrix, targets: &[usize]) -> Result<QuditState> {
        let mut out = self.clone();
        out.apply_gate_mut(gate, targets)?;
        Ok(out)
    }

    pub fn apply_gate_mut(&mut self, gate: &UnitaryMatrix, targets: &[usize]) -> Result<()> {
        check_targets(self.dim, self.num_qudits, gate.dim(), targets)?;
        apply_kernel(&mut self.amplitudes, self.dim, self.num_qudits, gate.entries(), targets);
        Ok(())
    }

    /// Applies the full-register unitary `u`.
    pub fn apply_unitary(&self, u: &UnitaryMatrix) -> Result<QuditState> {
        if u.dim() != self.amplitudes.len() {
            return Err(Error::DimensionMismatch { expected: self.amplitudes.len(), found: u.dim() });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.amplitudes.len()];
        matvec(u.entries(), &self.amplitudes, &mut out);
        Ok(Self::from_trusted(self.dim, self.num_qudits, out))
    }

    /// Marginal distribution over the computational basis of `measured`
    /// (first listed qudit most significant); unmeasured qudits are summed out.
    pub fn measure_probs(&self, measured: &[usize]) -> Result<Vec<f64>> {
        if measured.is_empty() {
            return Err(Error::Empty("measured qudit list"));
        }
        check_targets(self.dim, self.num_qudits, self.dim.pow(measured.len() as u32), measured)?;
        Ok(marginal_probs(&self.amplitudes, self.dim, self.num_qudits, measured))
    }

    /// Probabilities of every basis state of the full register.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

fn check_register(dim: usize, num_qudits: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::Config(format!("qudit dimension must be at least 2, got {dim}")));
    }
    if num_qudits < 1 {
        return Err(Error::Config("a register needs at least one qudit".into()));
    }
    Ok(())
}

fn check_targets(dim: usize, num_qudits: usize, gate_dim: usize, targets: &[usize]) -> Result<()> {
    let expected = dim.pow(targets.len() as u32);
    if gate_dim != expected || targets.is_empty() {
        return Err(Error::DimensionMismatch { expected, found: gate_dim });
    }
    for (i, &t) in targets.iter().enumerate() {
        if t >= num_qudits {
            return Err(Error::InvalidQudit { index: t, num_qudits });
        }
        if targets[..i].contains(&t) {
            return Err(Error::DuplicateTarget(t));
        }
    }
    Ok(())
}

pub(crate) fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn matvec(m: &DMatrix<Complex64>, v: &[Complex64], out: &mut [Complex64]) {
    let n = v.len();
    for (r, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in 0..n {
            acc += m[(r, c)] * v[c];
        }
        *o = acc;
    }
}

/// In-place application of a `d^k × d^k` gate on `targets` of an `n`-qudit
/// amplitude buffer. Targets must already be validated.
pub(crate) fn apply_kernel(
    amps: &mut [Complex64],
    dim: usize,
    num_qudits: usize,
    gate: &DMatrix<Complex64>,
    targets: &[usize],
) {
    let k = targets.len();
    let sub = gate.nrows();
    let strides: Vec<usize> = targets.iter().map(|&t| dim.pow((num_qudits - 1 - t) as u32)).collect();
    // Offsets of each sub-basis state relative to the block base index.
    let offsets: Vec<usize> = (0..sub)
        .map(|s| {
            let mut rem = s;
            let mut off = 0;
            for j in (0..k).rev() {
                off += (rem % dim) * strides[j];
                rem /= dim;
            }
            off
        })
        .collect();
    let total = amps.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); sub];
    for base in 0..total {
        // Block bases have digit 0 on every target qudit.
        if strides.iter().any(|&s| (base / s) % dim != 0) {
            continue;
        }
        for (b, &off) in buf.iter_mut().zip(&offsets) {
            *b = amps[base + off];
        }
        for (r, &off) in offsets.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, b) in buf.iter().enumerate() {
                acc += gate[(r, c)] * b;
            }
            amps[base + off] = acc;
        }
    }
}

pub(crate) fn marginal_probs(amps: &[Complex64], dim: usize, num_qudits: usize, measured: &[usize]) -> Vec<f64> {
    let mut probs = vec![0.0; dim.pow(measured.len() as u32)];
    for (index, a) in amps.iter().enumerate() {
        let mut out = 0;
        for &q in measured {
            let digit = (index / dim.pow((num_qudits - 1 - q) as u32)) % dim;
            out = out * dim + digit;
        }
        probs[out] += a.norm_sqr();
    }
    probs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{build_gate, GateId, GateTag};
    use crate::random::random_state;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pi_rotation_moves_population_to_level_one() {
        let s = QuditState::zero(3, 1).unwrap();
        let g = build_gate(&GateId::with_angle(GateTag::Xp01, std::f64::consts::PI)).unwrap();
        let out = s.apply_gate(&g, &[0]).unwrap();
        let p = out.probabilities();
        assert!((p[1] - 1.0).abs() < 1e-12);
        assert!(p[0] < 1e-12 && p[2] < 1e-12);
    }

    #[test]
    fn sum_gate_on_one_two() {
        let s = QuditState::basis(3, &[1, 2]).unwrap();
        let sum = build_gate(&GateId::fixed(GateTag::Sum)).unwrap();
        let out = s.apply_gate(&sum, &[0, 1]).unwrap();
        let expected = QuditState::basis(3, &[1, 0]).unwrap();
        assert!((out.fidelity(&expected).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sum_gate_with_reversed_targets() {
        // Control on qudit 1, target qudit 0: |2,1⟩ → |0,1⟩.
        let s = QuditState::basis(3, &[2, 1]).unwrap();
        let sum = build_gate(&GateId::fixed(GateTag::Sum)).unwrap();
        let out = s.apply_gate(&sum, &[1, 0]).unwrap();
        let expected = QuditState::basis(3, &[0, 1]).unwrap();
        assert!((out.fidelity(&expected).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cnot_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_state(2, 2, &mut rng);
        let cnot = build_gate(&GateId::fixed(GateTag::Cnot)).unwrap();
        let out = s.apply_gate(&cnot, &[0, 1]).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gate_errors() {
        let s = QuditState::zero(3, 2).unwrap();
        let h3 = build_gate(&GateId::fixed(GateTag::H3)).unwrap();
        let sum = build_gate(&GateId::fixed(GateTag::Sum)).unwrap();
        assert!(matches!(s.apply_gate(&h3, &[2]), Err(Error::InvalidQudit { .. })));
        assert!(matches!(s.apply_gate(&sum, &[1, 1]), Err(Error::DuplicateTarget(1))));
        assert!(matches!(s.apply_gate(&sum, &[0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn measure_basis_and_uniform() {
        let s = QuditState::basis(3, &[2]).unwrap();
        assert_eq!(s.measure_probs(&[0]).unwrap(), vec![0.0, 0.0, 1.0]);
        let h3 = build_gate(&GateId::fixed(GateTag::H3)).unwrap();
        let u = QuditState::zero(3, 1).unwrap().apply_gate(&h3, &[0]).unwrap();
        for p in u.measure_probs(&[0]).unwrap() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(matches!(s.measure_probs(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn marginal_of_product_state_matches_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi = random_state(3, 1, &mut rng);
        let phi = random_state(3, 1, &mut rng);
        let joint = psi.tensor(&phi).unwrap();
        // Oracle: brute-force joint distribution, then sum over the first digit.
        let full = joint.probabilities();
        let mut oracle = [0.0; 3];
        for a in 0..3 {
            for b in 0..3 {
                oracle[b] += full[3 * a + b];
            }
        }
        let got = joint.measure_probs(&[1]).unwrap();
        let direct = phi.probabilities();
        for b in 0..3 {
            assert!((got[b] - oracle[b]).abs() < 1e-12);
            assert!((got[b] - direct[b]).abs() < 1e-12);
        }
    }

    #[test]
    fn new_rejects_bad_inputs() {
        assert!(matches!(
            QuditState::new(3, 1, vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
            Err(Error::NotNormalized(_))
        ));
        assert!(QuditState::new(3, 2, vec![c(1.0, 0.0); 3]).is_err());
        assert!(QuditState::new(1, 1, vec![c(1.0, 0.0)]).is_err());
    }
}
