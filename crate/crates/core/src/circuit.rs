//! Parameterized gate sequences over a qudit register.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::gates::{build_gate, level_phase, qudit_hadamard, subspace_ry, GateId, GateTag};
use crate::state::{apply_kernel, QuditState};
use crate::unitary::UnitaryMatrix;
use crate::{Error, Result};

/// Which gate an operation applies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GateKind {
    Named(GateTag),
    /// Y rotation in the {|lower⟩,|upper⟩} subspace of the register's qudits.
    SubspaceRy {
        lower: usize,
        upper: usize,
    },
    /// Phase on a single level.
    LevelPhase {
        level: usize,
    },
    /// Qudit Fourier/Hadamard gate.
    Hadamard,
}

/// Where an operation's angle comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Angle {
    None,
    Fixed(f64),
    /// `scale · params[slot]`.
    Param {
        slot: usize,
        scale: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitOp {
    pub kind: GateKind,
    pub angle: Angle,
    pub targets: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCircuit {
    dim: usize,
    num_qudits: usize,
    param_count: usize,
    ops: Vec<CircuitOp>,
}

impl ParamCircuit {
    pub fn new(dim: usize, num_qudits: usize, param_count: usize) -> Self {
        Self { dim, num_qudits, param_count, ops: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_qudits(&self) -> usize {
        self.num_qudits
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn ops(&self) -> &[CircuitOp] {
        &self.ops
    }

    /// Appends an operation (applied after all previous ones).
    pub fn push(&mut self, kind: GateKind, angle: Angle, targets: &[usize]) -> Result<&mut Self> {
        let arity = match kind {
            GateKind::Named(tag) => {
                if tag.qudit_dim() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, found: tag.qudit_dim() });
                }
                let takes_angle = tag.is_parameterized();
                if takes_angle == matches!(angle, Angle::None) {
                    return Err(if takes_angle {
                        Error::MissingAngle(tag.to_string())
                    } else {
                        Error::UnexpectedAngle(tag.to_string())
                    });
                }
                tag.arity()
            }
            GateKind::SubspaceRy { lower, upper } => {
                if lower >= upper || upper >= self.dim {
                    return Err(Error::Config(format!("invalid subspace ({lower},{upper}) for d={}", self.dim)));
                }
                1
            }
            GateKind::LevelPhase { level } => {
                if level >= self.dim {
                    return Err(Error::Config(format!("invalid level {level} for d={}", self.dim)));
                }
                1
            }
            GateKind::Hadamard => 1,
        };
        if targets.len() != arity {
            return Err(Error::DimensionMismatch { expected: arity, found: targets.len() });
        }
        for (i, &t) in targets.iter().enumerate() {
            if t >= self.num_qudits {
                return Err(Error::InvalidQudit { index: t, num_qudits: self.num_qudits });
            }
            if targets[..i].contains(&t) {
                return Err(Error::DuplicateTarget(t));
            }
        }
        if let Angle::Param { slot, .. } = angle {
            if slot >= self.param_count {
                return Err(Error::Config(format!("parameter slot {slot} ≥ {}", self.param_count)));
            }
        }
        self.ops.push(CircuitOp { kind, angle, targets: targets.to_vec() });
        Ok(self)
    }

    /// Shorthand for a named gate driven by `params[slot]`.
    pub fn param(&mut self, tag: GateTag, slot: usize, target: usize) -> Result<&mut Self> {
        self.push(GateKind::Named(tag), Angle::Param { slot, scale: 1.0 }, &[target])
    }

    /// Shorthand for a fixed (angle-free) named gate.
    pub fn fixed(&mut self, tag: GateTag, targets: &[usize]) -> Result<&mut Self> {
        self.push(GateKind::Named(tag), Angle::None, targets)
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count {
            return Err(Error::DimensionMismatch { expected: self.param_count, found: params.len() });
        }
        Ok(())
    }

    fn op_matrix(&self, op: &CircuitOp, params: &[f64]) -> Result<UnitaryMatrix> {
        let angle = match op.angle {
            Angle::None => None,
            Angle::Fixed(a) => Some(a),
            Angle::Param { slot, scale } => Some(scale * params[slot]),
        };
        if let Some(a) = angle {
            if !a.is_finite() {
                return Err(Error::NonFinite(format!("circuit angle {a}")));
            }
        }
        match op.kind {
            GateKind::Named(tag) => build_gate(&GateId { tag, angle }),
            GateKind::SubspaceRy { lower, upper } => Ok(subspace_ry(self.dim, lower, upper, angle.unwrap_or(0.0))),
            GateKind::LevelPhase { level } => Ok(level_phase(self.dim, level, angle.unwrap_or(0.0))),
            GateKind::Hadamard => Ok(qudit_hadamard(self.dim)),
        }
    }

    /// The per-operation matrices for `params`, in application order.
    pub fn gate_matrices(&self, params: &[f64]) -> Result<Vec<UnitaryMatrix>> {
        self.check_params(params)?;
        self.ops.iter().map(|op| self.op_matrix(op, params)).collect()
    }

    fn check_state(&self, state: &QuditState) -> Result<()> {
        if state.dim_per_qudit() != self.dim || state.num_qudits() != self.num_qudits {
            return Err(Error::DimensionMismatch {
                expected: self.dim.pow(self.num_qudits as u32),
                found: state.amplitudes().len(),
            });
        }
        Ok(())
    }

    /// Runs the circuit on `state`.
    pub fn apply(&self, state: &QuditState, params: &[f64]) -> Result<QuditState> {
        self.check_state(state)?;
        let mats = self.gate_matrices(params)?;
        let mut amps = state.amplitudes().to_vec();
        for (op, m) in self.ops.iter().zip(&mats) {
            apply_kernel(&mut amps, self.dim, self.num_qudits, m.entries(), &op.targets);
        }
        Ok(QuditState::from_trusted(self.dim, self.num_qudits, amps))
    }

    /// Runs the inverse circuit (adjoint gates in reverse order) on `state`.
    pub fn apply_inverse(&self, state: &QuditState, params: &[f64]) -> Result<QuditState> {
        self.check_state(state)?;
        let mats = self.gate_matrices(params)?;
        let mut amps = state.amplitudes().to_vec();
        for (op, m) in self.ops.iter().zip(&mats).rev() {
            apply_kernel(&mut amps, self.dim, self.num_qudits, &m.entries().adjoint(), &op.targets);
        }
        Ok(QuditState::from_trusted(self.dim, self.num_qudits, amps))
    }

    /// The full-register unitary implemented by the circuit.
    pub fn unitary(&self, params: &[f64]) -> Result<UnitaryMatrix> {
        let mats = self.gate_matrices(params)?;
        let n = self.dim.pow(self.num_qudits as u32);
        let mut u: DMatrix<Complex64> = DMatrix::identity(n, n);
        // Left-multiplying by a gate acts on every column independently.
        for (op, m) in self.ops.iter().zip(&mats) {
            for col in u.as_mut_slice().chunks_mut(n) {
                apply_kernel(col, self.dim, self.num_qudits, m.entries(), &op.targets);
            }
        }
        Ok(UnitaryMatrix::from_trusted(u))
    }
}

impl fmt::Display for ParamCircuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for op in &self.ops {
            let name = match op.kind {
                GateKind::Named(tag) => tag.to_string(),
                GateKind::SubspaceRy { lower, upper } => format!("ry{lower}{upper}"),
                GateKind::LevelPhase { level } => format!("z{level}"),
                GateKind::Hadamard => format!("h{}", self.dim),
            };
            let angle = match op.angle {
                Angle::None => String::new(),
                Angle::Fixed(a) => format!("({a})"),
                Angle::Param { slot, scale } if scale == 1.0 => format!("(p{slot})"),
                Angle::Param { slot, scale } => format!("({scale}*p{slot})"),
            };
            let targets: Vec<String> = op.targets.iter().map(|t| t.to_string()).collect();
            writeln!(f, "{name}{angle} q[{}]", targets.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_state;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> ParamCircuit {
        let mut c = ParamCircuit::new(3, 2, 3);
        c.param(GateTag::Xp01, 0, 0).unwrap();
        c.param(GateTag::Z2, 1, 1).unwrap();
        c.fixed(GateTag::Sum, &[0, 1]).unwrap();
        c.push(GateKind::Named(GateTag::Ry12), Angle::Param { slot: 2, scale: 2.0 }, &[1]).unwrap();
        c
    }

    #[test]
    fn unitary_matches_apply() {
        let c = sample();
        let params = [0.3, -1.2, 0.8];
        let u = c.unitary(&params).unwrap();
        assert!(u.unitarity_deviation() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = random_state(3, 2, &mut rng);
        let a = c.apply(&psi, &params).unwrap();
        let b = psi.apply_unitary(&u).unwrap();
        assert!((a.fidelity(&b).unwrap() - 1.0).abs() < 1e-12);
        let back = c.apply_inverse(&a, &params).unwrap();
        assert!((back.fidelity(&psi).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn push_validation() {
        let mut c = ParamCircuit::new(3, 1, 1);
        assert!(c.param(GateTag::Rx, 0, 0).is_err());
        assert!(c.param(GateTag::Z1, 1, 0).is_err());
        assert!(c.param(GateTag::Z1, 0, 1).is_err());
        assert!(c.fixed(GateTag::Z1, &[0]).is_err());
        assert!(c.push(GateKind::Named(GateTag::H3), Angle::Fixed(1.0), &[0]).is_err());
        assert!(c.push(GateKind::SubspaceRy { lower: 1, upper: 3 }, Angle::Fixed(1.0), &[0]).is_err());
        assert!(c.unitary(&[]).is_err());
    }
}
