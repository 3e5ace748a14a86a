use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::state::QuditState;
use crate::{Error, Result};

/// A trace-one, Hermitian, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Uniform mixture `(1/m) Σ |ψₙ⟩⟨ψₙ|` of the given pure states.
    pub fn from_states(states: &[QuditState]) -> Result<Self> {
        let first = states.first().ok_or(Error::Empty("state list"))?;
        let dim = first.amplitudes().len();
        let mut acc = DensityAccumulator::new(dim);
        for s in states {
            if s.amplitudes().len() != dim || s.dim_per_qudit() != first.dim_per_qudit() {
                return Err(Error::DimensionMismatch { expected: dim, found: s.amplitudes().len() });
            }
            acc.add(s.amplitudes());
        }
        acc.finish()
    }

    pub fn pure(state: &QuditState) -> Self {
        let mut acc = DensityAccumulator::new(state.amplitudes().len());
        acc.add(state.amplitudes());
        acc.finish().expect("one state was added")
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// Tr[ρ²].
    pub fn purity(&self) -> f64 {
        trace_product(self, self).expect("same dimension")
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the (Hermitian part of the) matrix, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        let mut values: Vec<f64> = herm.symmetric_eigen().eigenvalues.iter().copied().collect();
        values.sort_by(|a, b| a.total_cmp(b));
        values
    }
}

/// Tr[a·b]. For density matrices the result is real and lies in [0, 1].
pub fn trace_product(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(trace_product_raw(&a.entries, &b.entries).re)
}

pub(crate) fn trace_product_raw(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Incrementally sums outer products of normalized amplitude vectors.
pub(crate) struct DensityAccumulator {
    sum: DMatrix<Complex64>,
    count: usize,
}

impl DensityAccumulator {
    pub(crate) fn new(dim: usize) -> Self {
        Self { sum: DMatrix::zeros(dim, dim), count: 0 }
    }

    pub(crate) fn add(&mut self, amps: &[Complex64]) {
        let n = amps.len();
        for i in 0..n {
            let ai = amps[i];
            for j in 0..n {
                self.sum[(i, j)] += ai * amps[j].conj();
            }
        }
        self.count += 1;
    }

    pub(crate) fn finish(self) -> Result<DensityMatrix> {
        if self.count == 0 {
            return Err(Error::Empty("state list"));
        }
        let scale = Complex64::new(1.0 / self.count as f64, 0.0);
        Ok(DensityMatrix { entries: self.sum * scale })
    }
}
