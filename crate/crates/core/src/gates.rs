//! Qubit and qutrit gate matrices.
//!
//! Qutrit rotations are exponentials of Gell-Mann generators restricted to
//! the {|0⟩,|1⟩} or {|1⟩,|2⟩} subspace. `Z1`/`Z2` are the virtual phase
//! gates (materialized as diagonal matrices), `H1`/`H2` the two-level
//! Hadamards and `Xp01`/`Xp12` the hardware X′ rotations `H Z(θ) H`, which
//! have two distinct eigenvalues.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::unitary::{unitarity_deviation, UnitaryMatrix};
use crate::{Error, Result, ACCUMULATED_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateTag {
    Rx,
    Ry,
    Rz,
    Zphase,
    H,
    Cnot,
    Rx01,
    Rx12,
    Ry01,
    Ry12,
    Rz01,
    Rz12,
    Z1,
    Z2,
    H1,
    H2,
    H3,
    Xp01,
    Xp12,
    Sum,
}

impl GateTag {
    pub const ALL: [GateTag; 20] = [
        GateTag::Rx,
        GateTag::Ry,
        GateTag::Rz,
        GateTag::Zphase,
        GateTag::H,
        GateTag::Cnot,
        GateTag::Rx01,
        GateTag::Rx12,
        GateTag::Ry01,
        GateTag::Ry12,
        GateTag::Rz01,
        GateTag::Rz12,
        GateTag::Z1,
        GateTag::Z2,
        GateTag::H1,
        GateTag::H2,
        GateTag::H3,
        GateTag::Xp01,
        GateTag::Xp12,
        GateTag::Sum,
    ];

    pub fn is_parameterized(self) -> bool {
        !matches!(self, GateTag::H | GateTag::Cnot | GateTag::H1 | GateTag::H2 | GateTag::H3 | GateTag::Sum)
    }

    /// Local dimension of the qudits the gate acts on.
    pub fn qudit_dim(self) -> usize {
        match self {
            GateTag::Rx | GateTag::Ry | GateTag::Rz | GateTag::Zphase | GateTag::H | GateTag::Cnot => 2,
            _ => 3,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            GateTag::Cnot | GateTag::Sum => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateTag::Rx => "rx",
            GateTag::Ry => "ry",
            GateTag::Rz => "rz",
            GateTag::Zphase => "z",
            GateTag::H => "h",
            GateTag::Cnot => "cnot",
            GateTag::Rx01 => "rx01",
            GateTag::Rx12 => "rx12",
            GateTag::Ry01 => "ry01",
            GateTag::Ry12 => "ry12",
            GateTag::Rz01 => "rz01",
            GateTag::Rz12 => "rz12",
            GateTag::Z1 => "z1",
            GateTag::Z2 => "z2",
            GateTag::H1 => "h1",
            GateTag::H2 => "h2",
            GateTag::H3 => "h3",
            GateTag::Xp01 => "xp01",
            GateTag::Xp12 => "xp12",
            GateTag::Sum => "sum",
        }
    }
}

impl fmt::Display for GateTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        GateTag::ALL.iter().copied().find(|t| t.name() == lower).ok_or_else(|| Error::UnknownGate(s.to_string()))
    }
}

/// A gate tag together with its angle, if it takes one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateId {
    pub tag: GateTag,
    pub angle: Option<f64>,
}

impl GateId {
    pub fn with_angle(tag: GateTag, angle: f64) -> Self {
        Self { tag, angle: Some(angle) }
    }

    pub fn fixed(tag: GateTag) -> Self {
        Self { tag, angle: None }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cis(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

fn mat(n: usize, rows: &[Complex64]) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(n, n, rows)
}

/// The matrix for `id`.
pub fn build_gate(id: &GateId) -> Result<UnitaryMatrix> {
    let tag = id.tag;
    let theta = match (tag.is_parameterized(), id.angle) {
        (true, Some(a)) if a.is_finite() => a,
        (true, Some(a)) => return Err(Error::NonFinite(format!("angle {a} for gate {tag}"))),
        (true, None) => return Err(Error::MissingAngle(tag.to_string())),
        (false, Some(_)) => return Err(Error::UnexpectedAngle(tag.to_string())),
        (false, None) => 0.0,
    };
    let (cs, sn) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    let m = match tag {
        GateTag::Rx => mat(2, &[c(cs, 0.0), c(0.0, -sn), c(0.0, -sn), c(cs, 0.0)]),
        GateTag::Ry => mat(2, &[c(cs, 0.0), c(-sn, 0.0), c(sn, 0.0), c(cs, 0.0)]),
        GateTag::Rz => mat(2, &[cis(-theta / 2.0), o, o, cis(theta / 2.0)]),
        GateTag::Zphase => mat(2, &[l, o, o, cis(theta)]),
        GateTag::H => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            mat(2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
        }
        GateTag::Cnot => {
            let mut m = DMatrix::zeros(4, 4);
            for (r, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
                m[(r, col)] = l;
            }
            m
        }
        GateTag::Rx01 => subspace_x(3, 0, 1, theta),
        GateTag::Rx12 => subspace_x(3, 1, 2, theta),
        GateTag::Ry01 => subspace_ry(3, 0, 1, theta).into_entries(),
        GateTag::Ry12 => subspace_ry(3, 1, 2, theta).into_entries(),
        GateTag::Rz01 => mat(3, &[cis(-theta / 2.0), o, o, o, cis(theta / 2.0), o, o, o, l]),
        GateTag::Rz12 => mat(3, &[l, o, o, o, cis(-theta / 2.0), o, o, o, cis(theta / 2.0)]),
        GateTag::Z1 => level_phase(3, 1, theta).into_entries(),
        GateTag::Z2 => level_phase(3, 2, theta).into_entries(),
        GateTag::H1 => hadamard_subspace(0, 1),
        GateTag::H2 => hadamard_subspace(1, 2),
        GateTag::H3 => qudit_hadamard(3).into_entries(),
        GateTag::Xp01 => {
            let h = hadamard_subspace(0, 1);
            &h * level_phase(3, 1, theta).entries() * &h
        }
        GateTag::Xp12 => {
            let h = hadamard_subspace(1, 2);
            &h * level_phase(3, 2, theta).entries() * &h
        }
        GateTag::Sum => {
            let mut m = DMatrix::zeros(9, 9);
            for a in 0..3 {
                for b in 0..3 {
                    m[(3 * a + (a + b) % 3, 3 * a + b)] = l;
                }
            }
            m
        }
    };
    Ok(UnitaryMatrix::from_trusted(m))
}

/// `exp(−iθ/2 σ_x)` on the {|u⟩,|v⟩} subspace of a `dim`-level qudit.
fn subspace_x(dim: usize, u: usize, v: usize, theta: f64) -> DMatrix<Complex64> {
    let mut m = DMatrix::identity(dim, dim);
    let (cs, sn) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    m[(u, u)] = c(cs, 0.0);
    m[(u, v)] = c(0.0, -sn);
    m[(v, u)] = c(0.0, -sn);
    m[(v, v)] = c(cs, 0.0);
    m
}

/// `exp(−iθ/2 σ_y)` on the {|u⟩,|v⟩} subspace of a `dim`-level qudit.
pub fn subspace_ry(dim: usize, u: usize, v: usize, theta: f64) -> UnitaryMatrix {
    let mut m = DMatrix::identity(dim, dim);
    let (cs, sn) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    m[(u, u)] = c(cs, 0.0);
    m[(u, v)] = c(-sn, 0.0);
    m[(v, u)] = c(sn, 0.0);
    m[(v, v)] = c(cs, 0.0);
    UnitaryMatrix::from_trusted(m)
}

/// Phase `e^{iθ}` on level `level` of a `dim`-level qudit.
pub fn level_phase(dim: usize, level: usize, theta: f64) -> UnitaryMatrix {
    let mut m = DMatrix::identity(dim, dim);
    m[(level, level)] = cis(theta);
    UnitaryMatrix::from_trusted(m)
}

/// Discrete Fourier transform on `dim` levels; `H` for qubits, `H3` for qutrits.
pub fn qudit_hadamard(dim: usize) -> UnitaryMatrix {
    let norm = 1.0 / (dim as f64).sqrt();
    let m = DMatrix::from_fn(dim, dim, |j, k| cis(2.0 * PI * ((j * k) % dim) as f64 / dim as f64) * norm);
    UnitaryMatrix::from_trusted(m)
}

fn hadamard_subspace(u: usize, v: usize) -> DMatrix<Complex64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = DMatrix::identity(3, 3);
    m[(u, u)] = c(h, 0.0);
    m[(u, v)] = c(h, 0.0);
    m[(v, u)] = c(h, 0.0);
    m[(v, v)] = c(-h, 0.0);
    m
}

/// Number of distinct eigenvalues of a unitary, clustering within 1e-8.
pub fn eigenvalue_count(gate: &UnitaryMatrix) -> Result<usize> {
    let deviation = unitarity_deviation(gate.entries());
    if !(deviation <= ACCUMULATED_TOL) {
        return Err(Error::NotUnitary(deviation));
    }
    let values = eigenvalues(gate);
    // Single-linkage clustering on the unit circle.
    let n = values.len();
    let mut cluster: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() < ACCUMULATED_TOL {
                let (a, b) = (cluster[i], cluster[j]);
                for x in cluster.iter_mut() {
                    if *x == b {
                        *x = a;
                    }
                }
            }
        }
    }
    cluster.sort_unstable();
    cluster.dedup();
    Ok(cluster.len())
}

/// Eigenvalues of a unitary from its complex Schur form.
pub fn eigenvalues(gate: &UnitaryMatrix) -> Vec<Complex64> {
    let (_, t) = gate.entries().clone().schur().unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}
