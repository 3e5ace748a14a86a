//! Seeded randomness: stream derivation, random states, Haar unitaries.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::state::QuditState;
use crate::unitary::UnitaryMatrix;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `seed` and a label.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    mix(mix(seed) ^ label.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Haar-random pure state on `num_qudits` qudits of dimension `dim`.
pub fn random_state<R: Rng + ?Sized>(dim: usize, num_qudits: usize, rng: &mut R) -> QuditState {
    let n = dim.pow(num_qudits as u32);
    let amps: Vec<Complex64> = (0..n).map(|_| complex_gaussian(rng)).collect();
    QuditState::from_unnormalized(dim, num_qudits, amps).expect("gaussian vector is nonzero")
}

/// Haar-random unitary: QR of a complex Gaussian matrix with the phases of
/// R's diagonal moved into Q.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> UnitaryMatrix {
    let z = DMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    UnitaryMatrix::from_trusted(q)
}

/// Haar-random element of SU(dim).
pub fn haar_special_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> UnitaryMatrix {
    let u = haar_unitary(dim, rng);
    let det = u.determinant();
    let root = Complex64::from_polar(1.0, -det.arg() / dim as f64);
    u.scale(root)
}

/// Uniform angles on [−π, π).
pub fn uniform_angles<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<f64> {
    use std::f64::consts::PI;
    (0..count).map(|_| rng.gen_range(-PI..PI)).collect()
}
