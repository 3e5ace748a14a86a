//! SU(3) decomposition into the qutrit rotation sequences.
//!
//! A 3×3 unitary is reduced to a diagonal matrix by three two-level
//! transition matrices, `D = T23(β3,φ3)·T12(β2,φ2)·U·T12(β1,φ1)⁻¹`, and the
//! transition angles plus the diagonal phases `γ` are mapped onto the eight
//! angles of either the Gell-Mann sequence `R_L` or the hardware sequence
//! `Z1·X′01·Z2·X′12·Z2·Z1·X′01·Z1`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{hardware_sequence_gate, rl_gate, rl_prime_gate};
use crate::random::random_state;
use crate::state::marginal_probs;
use crate::unitary::{max_abs_diff, unitarity_deviation, UnitaryMatrix};
use crate::{Error, Result};

/// Below this magnitude the closed-form angle formulas lose accuracy and the
/// sequential elimination is used instead.
const CLOSED_FORM_FLOOR: f64 = 1e-7;

/// Target gate sequence of a decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Su3Form {
    /// `Rz01(θ8)·Rx01(θ7)·Rz12(θ6)·Rx12(θ5)·Rz12(θ4)·Rz01(θ3)·Rx01(θ2)·Rz01(θ1)`.
    Theoretical,
    /// `Z1(θ8)·X′01(θ7)·Z2(θ6)·X′12(θ5)·Z2(θ4)·Z1(θ3)·X′01(θ2)·Z1(θ1)`.
    Hardware,
}

impl fmt::Display for Su3Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Su3Form::Theoretical => "theoretical",
            Su3Form::Hardware => "hardware",
        })
    }
}

impl FromStr for Su3Form {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "theoretical" | "rl" => Ok(Su3Form::Theoretical),
            "hardware" | "hw" => Ok(Su3Form::Hardware),
            other => Err(Error::Parse(format!("unknown decomposition form '{other}'"))),
        }
    }
}

/// `T12(β,φ)`: mixes levels 0 and 1.
pub fn transition_12(beta: f64, phi: f64) -> DMatrix<Complex64> {
    transition(0, beta, phi)
}

/// `T23(β,φ)`: mixes levels 1 and 2.
pub fn transition_23(beta: f64, phi: f64) -> DMatrix<Complex64> {
    transition(1, beta, phi)
}

fn transition(lower: usize, beta: f64, phi: f64) -> DMatrix<Complex64> {
    let mut t = DMatrix::identity(3, 3);
    let e = Complex64::from_polar(1.0, phi);
    let (s, c) = beta.sin_cos();
    t[(lower, lower)] = e * c;
    t[(lower, lower + 1)] = Complex64::new(-s, 0.0);
    t[(lower + 1, lower)] = e * s;
    t[(lower + 1, lower + 1)] = Complex64::new(c, 0.0);
    t
}

/// Transition angles and the diagonal they produce.
#[derive(Clone, Debug)]
pub struct Diagonalization {
    pub beta: [f64; 3],
    pub phi: [f64; 3],
    /// `T23(β3,φ3)·T12(β2,φ2)·U·T12(β1,φ1)⁻¹`.
    pub diagonal: DMatrix<Complex64>,
}

impl Diagonalization {
    /// Largest off-diagonal magnitude or deviation of a diagonal entry from
    /// unit modulus.
    pub fn residual(&self) -> f64 {
        let d = &self.diagonal;
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { (d[(i, j)].norm() - 1.0).abs() } else { d[(i, j)].norm() };
                worst = worst.max(e);
            }
        }
        worst
    }
}

/// Reduces a 3×3 unitary to diagonal form.
///
/// Uses the closed-form angles when every ratio they involve is well
/// conditioned and sequential Givens elimination otherwise.
pub fn diagonalize(u: &UnitaryMatrix) -> Result<Diagonalization> {
    if u.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: u.dim() });
    }
    let m = u.entries();
    let dev = unitarity_deviation(m);
    if dev > 1e-8 {
        return Err(Error::NotUnitary(dev));
    }
    let a = |i: usize, j: usize| m[(i - 1, j - 1)];
    let ca = a(2, 1) * a(1, 2) - a(1, 1) * a(2, 2);
    let cb = a(3, 1) * a(1, 2) - a(1, 1) * a(3, 2);
    let cc = a(3, 1) * a(2, 2) - a(2, 1) * a(3, 2);
    let smallest =
        [ca.norm(), cb.norm(), cc.norm(), a(3, 1).norm(), a(3, 2).norm()].into_iter().fold(f64::INFINITY, f64::min);

    let (beta, phi) = if smallest > CLOSED_FORM_FLOOR {
        let b1 = a(3, 1).norm().atan2(a(3, 2).norm());
        let p1 = -(a(3, 2) / a(3, 1)).arg();
        let b2 = cc.norm().atan2(cb.norm());
        let p2 = (-cc / cb).arg();
        let b3 = (cb.norm_sqr() + cc.norm_sqr()).sqrt().atan2(ca.norm());
        let p3 = (-cb / ca).arg();
        ([b1, b2, b3], [p1, p2, p3])
    } else {
        eliminate(m)
    };
    let t1 = transition_12(beta[0], phi[0]);
    let t2 = transition_12(beta[1], phi[1]);
    let t3 = transition_23(beta[2], phi[2]);
    let diagonal = t3 * t2 * m * t1.adjoint();
    Ok(Diagonalization { beta, phi, diagonal })
}

fn eliminate(m: &DMatrix<Complex64>) -> ([f64; 3], [f64; 3]) {
    // (β, φ) with e^{iφ}·sinβ·x + cosβ·y = 0.
    fn elim(x: Complex64, y: Complex64) -> (f64, f64) {
        if y.norm() == 0.0 {
            (0.0, 0.0)
        } else if x.norm() == 0.0 {
            (FRAC_PI_2, 0.0)
        } else {
            let r = y / x;
            (r.norm().atan(), (-r).arg())
        }
    }
    let (a31, a32) = (m[(2, 0)], m[(2, 1)]);
    let (b1, p1) = if a31.norm() == 0.0 {
        (0.0, 0.0)
    } else if a32.norm() == 0.0 {
        (FRAC_PI_2, 0.0)
    } else {
        ((a31 / a32).norm().atan(), -(a32 / a31).arg())
    };
    let step1 = m * transition_12(b1, p1).adjoint();
    let (b2, p2) = elim(step1[(0, 0)], step1[(1, 0)]);
    let step2 = transition_12(b2, p2) * step1;
    let (b3, p3) = elim(step2[(1, 1)], step2[(2, 1)]);
    ([b1, b2, b3], [p1, p2, p3])
}

/// Angles reproducing a 3×3 unitary as `e^{i·global_phase}` times the gate
/// sequence of `form`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Su3Decomposition {
    pub form: Su3Form,
    pub beta: [f64; 3],
    pub phi: [f64; 3],
    pub gamma: [f64; 3],
    /// Sequence angles, θ1 first (applied first).
    pub theta: [f64; 8],
    pub global_phase: f64,
}

impl Su3Decomposition {
    /// The gate sequence without the global phase.
    pub fn sequence(&self) -> UnitaryMatrix {
        match self.form {
            Su3Form::Theoretical => rl_gate(&self.theta),
            Su3Form::Hardware => hardware_sequence_gate(&self.theta),
        }
    }

    /// `e^{i·global_phase}·sequence`.
    pub fn reconstruct(&self) -> UnitaryMatrix {
        self.sequence().scale(Complex64::from_polar(1.0, self.global_phase))
    }

    /// Angles for `R_L′` with the same measurement statistics as the hardware
    /// sequence: the leftmost `Z1` is dropped and `X′01` moves to slot 8.
    pub fn rl_prime_angles(&self) -> Result<[f64; 8]> {
        if self.form != Su3Form::Hardware {
            return Err(Error::Config("R_L′ angles need a hardware-form decomposition".into()));
        }
        let mut t = self.theta;
        t[7] = self.theta[6];
        t[6] = 0.0;
        Ok(t)
    }
}

/// Decomposes a 3×3 unitary. A U(3) input first has `arg(det)/3` moved into
/// the global phase.
pub fn decompose_su3(u: &UnitaryMatrix, form: Su3Form) -> Result<Su3Decomposition> {
    if u.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: u.dim() });
    }
    let dev = u.unitarity_deviation();
    if dev > 1e-8 {
        return Err(Error::NotUnitary(dev));
    }
    let alpha = u.determinant().arg() / 3.0;
    let special = UnitaryMatrix::from_trusted(u.entries() * Complex64::from_polar(1.0, -alpha));
    let diag = diagonalize(&special)?;
    let [b1, b2, b3] = diag.beta;
    let [p1, p2, p3] = diag.phi;
    let gamma = [diag.diagonal[(0, 0)].arg(), diag.diagonal[(1, 1)].arg(), diag.diagonal[(2, 2)].arg()];
    let [g1, g2, g3] = gamma;
    let (theta, phase) = match form {
        Su3Form::Theoretical => (
            [
                -FRAC_PI_2 - p1,
                2.0 * b1,
                (-4.0 * g1 + 2.0 * g2 + 2.0 * g3 - p1 + p2 - 2.0 * p3) / 3.0,
                (-4.0 * g1 - 4.0 * g2 + 8.0 * g3 - 4.0 * p1 + p2 - 2.0 * p3) / 6.0 - 0.75 * PI,
                -2.0 * b3,
                p2 / 2.0 + p3 + 0.75 * PI,
                -2.0 * b2,
                p2 + FRAC_PI_2,
            ],
            (g1 + g2 + g3 + p1 - p2 - p3) / 3.0,
        ),
        Su3Form::Hardware => (
            [
                -p1 - FRAC_PI_2,
                2.0 * b1,
                -g1 + g2 + b3 - p3,
                -g1 + g3 + b1 + b3 - p1 - p3 - PI,
                -2.0 * b3,
                -b2 + p2 + p3 + PI,
                -2.0 * b2,
                p2 + FRAC_PI_2,
            ],
            g1 - b1 + b2 + p1 - p2,
        ),
    };
    Ok(Su3Decomposition { form, beta: diag.beta, phi: diag.phi, gamma, theta, global_phase: phase + alpha })
}

/// Largest elementwise error of `e^{i·global_phase}·sequence` against `u`.
pub fn reconstruction_error(u: &UnitaryMatrix, dec: &Su3Decomposition) -> f64 {
    max_abs_diff(u.entries(), dec.reconstruct().entries())
}

/// Measurement-level equivalence of `R_L(θ)` and the `R_L′` circuit obtained
/// through the hardware decomposition: the largest Z-basis probability
/// difference over `samples` random input states.
pub fn verify_rl_equiv_with<R: Rng + ?Sized>(theta: &[f64; 8], samples: usize, rng: &mut R) -> Result<f64> {
    let v = rl_gate(theta);
    let dec = decompose_su3(&v, Su3Form::Hardware)?;
    let w = rl_prime_gate(&dec.rl_prime_angles()?);
    let mut worst = 0.0f64;
    let mut a = vec![Complex64::new(0.0, 0.0); 3];
    let mut b = vec![Complex64::new(0.0, 0.0); 3];
    for _ in 0..samples {
        let psi = random_state(3, 1, rng);
        crate::state::matvec(v.entries(), psi.amplitudes(), &mut a);
        crate::state::matvec(w.entries(), psi.amplitudes(), &mut b);
        let pa = marginal_probs(&a, 3, 1, &[0]);
        let pb = marginal_probs(&b, 3, 1, &[0]);
        for (x, y) in pa.iter().zip(&pb) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

/// [`verify_rl_equiv_with`] over 1000 random states.
pub fn verify_rl_equiv<R: Rng + ?Sized>(theta: &[f64; 8], rng: &mut R) -> Result<f64> {
    verify_rl_equiv_with(theta, 1000, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{build_gate, GateId, GateTag};
    use crate::random::{haar_special_unitary, haar_unitary, uniform_angles};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check(u: &UnitaryMatrix) {
        for form in [Su3Form::Theoretical, Su3Form::Hardware] {
            let dec = decompose_su3(u, form).unwrap();
            let err = reconstruction_error(u, &dec);
            assert!(err < 1e-9, "{form}: {err}");
        }
        assert!(diagonalize(&special(u)).unwrap().residual() < 1e-9);
    }

    fn special(u: &UnitaryMatrix) -> UnitaryMatrix {
        let a = u.determinant().arg() / 3.0;
        u.scale(Complex64::from_polar(1.0, -a))
    }

    fn gate(tag: GateTag, t: f64) -> UnitaryMatrix {
        build_gate(&GateId::with_angle(tag, t)).unwrap()
    }

    fn permutation(p: [usize; 3]) -> UnitaryMatrix {
        let mut m = DMatrix::zeros(3, 3);
        for (r, &c) in p.iter().enumerate() {
            m[(r, c)] = Complex64::new(1.0, 0.0);
        }
        UnitaryMatrix::new(m, 1e-12).unwrap()
    }

    #[test]
    fn identity_uses_degenerate_branch() {
        let id = UnitaryMatrix::identity(3);
        let diag = diagonalize(&id).unwrap();
        assert_eq!(diag.beta, [0.0; 3]);
        check(&id);
    }

    #[test]
    fn diagonal_target_has_zero_betas() {
        let u = UnitaryMatrix::diagonal(&[
            Complex64::from_polar(1.0, 0.0),
            Complex64::from_polar(1.0, 0.4),
            Complex64::from_polar(1.0, -1.1),
        ]);
        let dec = decompose_su3(&u, Su3Form::Hardware).unwrap();
        assert_eq!(dec.beta, [0.0; 3]);
        check(&u);
    }

    #[test]
    fn haar_random_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            check(&haar_special_unitary(3, &mut rng));
        }
        for _ in 0..100 {
            check(&haar_unitary(3, &mut rng));
        }
    }

    #[test]
    fn degenerate_and_near_degenerate_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for p in perms {
            let pm = permutation(p);
            for small in [0.0, 1e-12, 1e-9, 1e-7, 2e-7, 1e-5] {
                let t = uniform_angles(3, &mut rng);
                let cases = [
                    pm.compose(&gate(GateTag::Rx01, t[0])).unwrap(),
                    gate(GateTag::Rx12, t[1]).compose(&pm).unwrap(),
                    pm.compose(&gate(GateTag::Rx01, small)).unwrap().compose(&gate(GateTag::Rx12, t[2])).unwrap(),
                    gate(GateTag::Ry12, small).compose(&pm).unwrap().compose(&gate(GateTag::Rz01, t[0])).unwrap(),
                    gate(GateTag::Rx01, 0.4).compose(&pm).unwrap().compose(&gate(GateTag::Rx12, small)).unwrap(),
                ];
                for u in &cases {
                    check(u);
                }
            }
        }
    }

    #[test]
    fn closed_form_agrees_with_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..200 {
            let u = haar_special_unitary(3, &mut rng);
            let (beta, phi) = eliminate(u.entries());
            let closed = diagonalize(&u).unwrap();
            for k in 0..3 {
                assert!((beta[k] - closed.beta[k]).abs() < 1e-9);
                let dp = Complex64::from_polar(1.0, phi[k] - closed.phi[k]);
                assert!((dp - 1.0).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn rl_prime_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        assert!(verify_rl_equiv(&[0.0; 8], &mut rng).unwrap() < 1e-12);
        for _ in 0..20 {
            let t: [f64; 8] = uniform_angles(8, &mut rng).try_into().unwrap();
            assert!(verify_rl_equiv_with(&t, 200, &mut rng).unwrap() < 1e-9);
        }
    }

    #[test]
    fn leftmost_z1_does_not_change_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let mut t: [f64; 8] = uniform_angles(8, &mut rng).try_into().unwrap();
        let psi = random_state(3, 1, &mut rng);
        let base = psi.apply_unitary(&hardware_sequence_gate(&t)).unwrap().probabilities();
        for shift in [0.3, -2.0, 3.1] {
            t[7] += shift;
            let p = psi.apply_unitary(&hardware_sequence_gate(&t)).unwrap().probabilities();
            for (a, b) in base.iter().zip(&p) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decompose_su3(&UnitaryMatrix::identity(2), Su3Form::Hardware).is_err());
        let m = DMatrix::from_element(3, 3, Complex64::new(0.5, 0.0));
        let not_unitary = UnitaryMatrix::from_trusted(m);
        assert!(decompose_su3(&not_unitary, Su3Form::Theoretical).is_err());
        let dec = decompose_su3(&UnitaryMatrix::identity(3), Su3Form::Theoretical).unwrap();
        assert!(dec.rl_prime_angles().is_err());
        assert_eq!("hardware".parse::<Su3Form>().unwrap(), Su3Form::Hardware);
    }
}
