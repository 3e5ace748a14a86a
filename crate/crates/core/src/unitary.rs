use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

/// A square complex matrix with `U·U† = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix {
    entries: DMatrix<Complex64>,
}

impl UnitaryMatrix {
    /// Wraps `entries`, rejecting matrices that deviate from unitarity by
    /// more than `tol` in any element of `U·U† − I`.
    pub fn new(entries: DMatrix<Complex64>, tol: f64) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), found: entries.ncols() });
        }
        let deviation = unitarity_deviation(&entries);
        if !(deviation <= tol) {
            return Err(Error::NotUnitary(deviation));
        }
        Ok(Self { entries })
    }

    /// Wraps a matrix known to be unitary by construction.
    pub(crate) fn from_trusted(entries: DMatrix<Complex64>) -> Self {
        debug_assert!(entries.nrows() == entries.ncols());
        Self { entries }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_trusted(DMatrix::identity(dim, dim))
    }

    pub fn diagonal(phases: &[Complex64]) -> Self {
        Self::from_trusted(DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(phases)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    /// Matrix product `self · rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &UnitaryMatrix) -> Result<UnitaryMatrix> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: rhs.dim() });
        }
        Ok(Self::from_trusted(&self.entries * &rhs.entries))
    }

    pub fn adjoint(&self) -> UnitaryMatrix {
        Self::from_trusted(self.entries.adjoint())
    }

    pub fn kron(&self, rhs: &UnitaryMatrix) -> UnitaryMatrix {
        Self::from_trusted(self.entries.kronecker(&rhs.entries))
    }

    pub fn scale(&self, phase: Complex64) -> UnitaryMatrix {
        Self::from_trusted(&self.entries * phase)
    }

    pub fn determinant(&self) -> Complex64 {
        self.entries.determinant()
    }

    /// Max elementwise deviation of `U·U†` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.entries)
    }

    /// Max elementwise distance `‖self − other‖_max`.
    pub fn max_distance(&self, other: &UnitaryMatrix) -> f64 {
        max_abs_diff(&self.entries, &other.entries)
    }

    /// Distance after removing the best single global phase between the two
    /// matrices. Returns `(distance, phase)` with `self ≈ e^{i·phase}·other`.
    pub fn phase_distance(&self, other: &UnitaryMatrix) -> (f64, f64) {
        // Tr(other† self) = e^{iφ}·dim when the matrices agree up to phase.
        let overlap = (other.entries.adjoint() * &self.entries).trace();
        let phase = if overlap.norm() > 0.0 { overlap.arg() } else { 0.0 };
        let aligned = &other.entries * Complex64::from_polar(1.0, phase);
        (max_abs_diff(&self.entries, &aligned), phase)
    }
}

pub(crate) fn unitarity_deviation(m: &DMatrix<Complex64>) -> f64 {
    let product = m * m.adjoint();
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            let d = (product[(i, j)] - target).norm();
            if d.is_nan() {
                return f64::NAN;
            }
            worst = worst.max(d);
        }
    }
    worst
}

pub(crate) fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_unitary() {
        let m = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(UnitaryMatrix::new(m, 1e-10), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn rejects_non_square() {
        let m = DMatrix::from_element(2, 3, Complex64::new(0.0, 0.0));
        assert!(UnitaryMatrix::new(m, 1e-10).is_err());
    }

    #[test]
    fn phase_distance_recovers_global_phase() {
        let u = UnitaryMatrix::diagonal(&[Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)]);
        let v = u.scale(Complex64::from_polar(1.0, 0.7));
        let (d, phase) = v.phase_distance(&u);
        assert!(d < 1e-14);
        assert!((phase - 0.7).abs() < 1e-14);
    }
}
