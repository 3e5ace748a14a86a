//! Classifier ansätze.
//!
//! Tree-tensor-network classifiers built from general single-qudit blocks:
//! `Rz·Rx·Rz` for qubits and the 8-parameter hardware block `R_L′` for
//! qutrits. The two-qudit tree applies a block to each qudit, an entangler
//! (CNOT or SUM, controlled by qudit 0), and a final block on the measured
//! qudit 1.

use crate::circuit::ParamCircuit;
use crate::gates::{build_gate, GateId, GateTag};
use crate::unitary::UnitaryMatrix;
use crate::{Error, Result};

/// Parameters of one single-qudit block.
pub fn block_param_count(dim: usize) -> Result<usize> {
    match dim {
        2 => Ok(3),
        3 => Ok(8),
        _ => Err(Error::Config(format!("no single-qudit block for d={dim}"))),
    }
}

/// Appends a general single-qudit block on `qudit` using slots
/// `first_slot..first_slot + block_param_count(dim)`.
pub fn push_block(c: &mut ParamCircuit, qudit: usize, first_slot: usize) -> Result<()> {
    let s = first_slot;
    match c.dim() {
        2 => {
            c.param(GateTag::Rz, s, qudit)?;
            c.param(GateTag::Rx, s + 1, qudit)?;
            c.param(GateTag::Rz, s + 2, qudit)?;
        }
        3 => {
            // R_L′ = X′01(θ8)·Z1(θ7)·Z2(θ6)·X′12(θ5)·Z2(θ4)·Z1(θ3)·X′01(θ2)·Z1(θ1)
            for (k, tag) in RL_PRIME_SEQUENCE.iter().enumerate() {
                c.param(*tag, s + k, qudit)?;
            }
        }
        d => return Err(Error::Config(format!("no single-qudit block for d={d}"))),
    }
    Ok(())
}

/// R_L′ gates in application order (θ1 first).
const RL_PRIME_SEQUENCE: [GateTag; 8] =
    [GateTag::Z1, GateTag::Xp01, GateTag::Z1, GateTag::Z2, GateTag::Xp12, GateTag::Z2, GateTag::Z1, GateTag::Xp01];

/// R_L gates in application order (θ1 first).
const RL_SEQUENCE: [GateTag; 8] = [
    GateTag::Rz01,
    GateTag::Rx01,
    GateTag::Rz01,
    GateTag::Rz12,
    GateTag::Rx12,
    GateTag::Rz12,
    GateTag::Rx01,
    GateTag::Rz01,
];

/// Hardware decomposition sequence `Z1(θ8)·X′01(θ7)·Z2(θ6)·X′12(θ5)·Z2(θ4)·Z1(θ3)·X′01(θ2)·Z1(θ1)`
/// in application order.
const HARDWARE_SEQUENCE: [GateTag; 8] =
    [GateTag::Z1, GateTag::Xp01, GateTag::Z1, GateTag::Z2, GateTag::Xp12, GateTag::Z2, GateTag::Xp01, GateTag::Z1];

/// One-qudit classifier: a single general block.
pub fn ttn_one_qudit(dim: usize) -> Result<ParamCircuit> {
    let p = block_param_count(dim)?;
    let mut c = ParamCircuit::new(dim, 1, p);
    push_block(&mut c, 0, 0)?;
    Ok(c)
}

/// Two-qudit tree classifier: `R ⊗ R`, entangler, then `R` on qudit 1.
pub fn ttn_two_qudit(dim: usize) -> Result<ParamCircuit> {
    let p = block_param_count(dim)?;
    let entangler = if dim == 2 { GateTag::Cnot } else { GateTag::Sum };
    let mut c = ParamCircuit::new(dim, 2, 3 * p);
    push_block(&mut c, 0, 0)?;
    push_block(&mut c, 1, p)?;
    c.fixed(entangler, &[0, 1])?;
    push_block(&mut c, 1, 2 * p)?;
    Ok(c)
}

/// Universal two-qubit circuit with 15 parameters: four `Rz·Rx·Rz` blocks
/// around a three-CNOT core with interleaved rotations.
pub fn universal_two_qubit() -> ParamCircuit {
    let mut c = ParamCircuit::new(2, 2, 15);
    let build = |c: &mut ParamCircuit| -> Result<()> {
        push_block(c, 0, 0)?;
        push_block(c, 1, 3)?;
        c.fixed(GateTag::Cnot, &[1, 0])?;
        c.param(GateTag::Rz, 6, 0)?;
        c.param(GateTag::Ry, 7, 1)?;
        c.fixed(GateTag::Cnot, &[0, 1])?;
        c.param(GateTag::Ry, 8, 1)?;
        c.fixed(GateTag::Cnot, &[1, 0])?;
        push_block(c, 0, 9)?;
        push_block(c, 1, 12)?;
        Ok(())
    };
    build(&mut c).expect("static circuit layout is valid");
    c
}

fn sequence_product(tags: &[GateTag; 8], theta: &[f64; 8]) -> UnitaryMatrix {
    let mut u = UnitaryMatrix::identity(3);
    for (tag, &t) in tags.iter().zip(theta) {
        let g = build_gate(&GateId::with_angle(*tag, t)).expect("parameterized qutrit gate");
        u = g.compose(&u).expect("3×3");
    }
    u
}

/// `R_L(θ) = Rz01(θ8)·Rx01(θ7)·Rz12(θ6)·Rx12(θ5)·Rz12(θ4)·Rz01(θ3)·Rx01(θ2)·Rz01(θ1)`.
pub fn rl_gate(theta: &[f64; 8]) -> UnitaryMatrix {
    sequence_product(&RL_SEQUENCE, theta)
}

/// `R_L′(θ) = X′01(θ8)·Z1(θ7)·Z2(θ6)·X′12(θ5)·Z2(θ4)·Z1(θ3)·X′01(θ2)·Z1(θ1)`.
pub fn rl_prime_gate(theta: &[f64; 8]) -> UnitaryMatrix {
    sequence_product(&RL_PRIME_SEQUENCE, theta)
}

/// `Z1(θ8)·X′01(θ7)·Z2(θ6)·X′12(θ5)·Z2(θ4)·Z1(θ3)·X′01(θ2)·Z1(θ1)`, the
/// exact hardware-gate factorization produced by SU(3) decomposition.
pub fn hardware_sequence_gate(theta: &[f64; 8]) -> UnitaryMatrix {
    sequence_product(&HARDWARE_SEQUENCE, theta)
}
