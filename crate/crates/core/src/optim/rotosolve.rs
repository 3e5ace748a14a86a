use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::seq::SliceRandom;

use super::finite;
use crate::random::stream_rng;
use crate::{Error, Result};

/// First-harmonic least-squares fit `f(θ) = offset + amplitude·cos(θ − phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinusoidFit {
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    /// Minimizer in (−π, π]; 0 for a flat fit.
    pub argmin: f64,
    /// Root-mean-square fit residual.
    pub residual: f64,
}

impl SinusoidFit {
    pub fn eval(&self, theta: f64) -> f64 {
        self.offset + self.amplitude * (theta - self.phase).cos()
    }

    pub fn min_value(&self) -> f64 {
        self.offset - self.amplitude
    }
}

fn wrap(theta: f64) -> f64 {
    let mut t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// Fits `c + a·cos θ + b·sin θ` to `(angle, loss)` samples.
pub fn rotosolve_fit(angles: &[f64], losses: &[f64]) -> Result<SinusoidFit> {
    if angles.len() != losses.len() {
        return Err(Error::DimensionMismatch { expected: angles.len(), found: losses.len() });
    }
    if angles.len() < 3 {
        return Err(Error::Config("a sinusoid fit needs at least three samples".into()));
    }
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for (&t, &l) in angles.iter().zip(losses) {
        let row = Vector3::new(1.0, t.cos(), t.sin());
        ata += row * row.transpose();
        atb += row * finite(l, "sweep sample")?;
    }
    let sol = ata.lu().solve(&atb).ok_or_else(|| Error::Config("sweep angles do not determine a sinusoid".into()))?;
    let (c, a, b) = (sol[0], sol[1], sol[2]);
    let amplitude = a.hypot(b);
    let scale = losses.iter().fold(1.0f64, |m, l| m.max(l.abs()));
    let flat = amplitude <= 1e-12 * scale;
    let phase = if flat { 0.0 } else { b.atan2(a) };
    let argmin = if flat { 0.0 } else { wrap(phase + PI) };
    let fit = SinusoidFit { amplitude: if flat { 0.0 } else { amplitude }, phase, offset: c, argmin, residual: 0.0 };
    let sse: f64 = angles.iter().zip(losses).map(|(&t, &l)| (fit.eval(t) - l).powi(2)).sum();
    Ok(SinusoidFit { residual: (sse / angles.len() as f64).sqrt(), ..fit })
}

/// `n` equally spaced points on [−π, π).
pub fn sweep_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| -PI + 2.0 * PI * k as f64 / n as f64).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RotosolveConfig {
    pub samples_per_sweep: usize,
    pub iterations: usize,
    /// Seed for the parameter visiting order.
    pub seed: u64,
}

impl Default for RotosolveConfig {
    fn default() -> Self {
        Self { samples_per_sweep: 16, iterations: 32, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RotosolveResult {
    pub params: Vec<f64>,
    /// Loss at the initial point followed by the loss after every iteration.
    pub losses: Vec<f64>,
    /// Parameters after every iteration.
    pub param_history: Vec<Vec<f64>>,
    /// Index of the parameter updated in each iteration.
    pub order: Vec<usize>,
    pub fits: Vec<SinusoidFit>,
}

/// One parameter at a time: sweep it over the grid, fit a sinusoid, and set it
/// to the fitted minimizer. Parameters are visited in seeded rounds where
/// none repeats before all others have been swept.
pub fn rotosolve_minimize<F>(mut f: F, init: &[f64], config: &RotosolveConfig) -> Result<RotosolveResult>
where
    F: FnMut(&[f64]) -> f64,
{
    if config.samples_per_sweep < 4 {
        return Err(Error::Config("rotosolve needs at least 4 samples per sweep".into()));
    }
    if init.is_empty() {
        return Err(Error::Empty("parameter vector"));
    }
    let grid = sweep_grid(config.samples_per_sweep);
    let mut rng = stream_rng(config.seed, 0x0707);
    let mut params = init.to_vec();
    let mut losses = vec![finite(f(&params), "objective")?];
    let mut param_history = Vec::with_capacity(config.iterations);
    let mut order = Vec::with_capacity(config.iterations);
    let mut fits = Vec::with_capacity(config.iterations);
    let mut round: Vec<usize> = Vec::new();
    let mut samples = vec![0.0; grid.len()];
    for _ in 0..config.iterations {
        if round.is_empty() {
            round = (0..params.len()).collect();
            round.shuffle(&mut rng);
            round.reverse();
        }
        let k = round.pop().expect("refilled above");
        let saved = params[k];
        for (s, &t) in samples.iter_mut().zip(&grid) {
            params[k] = t;
            *s = f(&params);
        }
        params[k] = saved;
        let fit = rotosolve_fit(&grid, &samples)?;
        params[k] = fit.argmin;
        losses.push(finite(f(&params), "objective")?);
        param_history.push(params.clone());
        order.push(k);
        fits.push(fit);
    }
    Ok(RotosolveResult { params, losses, param_history, order, fits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Normal;

    #[test]
    fn exact_sinusoid_recovery() {
        let grid = sweep_grid(16);
        let losses: Vec<f64> = grid.iter().map(|t| 1.0 - 0.5 * (t - 0.3).cos()).collect();
        let fit = rotosolve_fit(&grid, &losses).unwrap();
        assert!((fit.argmin - 0.3).abs() < 1e-9);
        assert!((fit.offset - 1.0).abs() < 1e-12);
        assert!((fit.amplitude - 0.5).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn flat_function() {
        let grid = sweep_grid(16);
        let fit = rotosolve_fit(&grid, &[0.7; 16]).unwrap();
        assert!(fit.amplitude.abs() < 1e-12);
        assert_eq!(fit.argmin, 0.0);
    }

    #[test]
    fn argmin_wraps_into_range() {
        let grid = sweep_grid(16);
        let losses: Vec<f64> = grid.iter().map(|t| (t - 0.1).cos()).collect();
        let fit = rotosolve_fit(&grid, &losses).unwrap();
        assert!(fit.argmin > -PI && fit.argmin <= PI);
        assert!((fit.argmin - (0.1 - PI)).abs() < 1e-9);
    }

    #[test]
    fn noisy_sinusoid() {
        let grid = sweep_grid(16);
        let noise = Normal::new(0.0, 0.05).unwrap();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let losses: Vec<f64> = grid.iter().map(|t| 1.0 - 0.5 * (t - 0.3).cos() + rng.sample(noise)).collect();
            let fit = rotosolve_fit(&grid, &losses).unwrap();
            assert!((fit.argmin - 0.3).abs() < 0.15);
        }
    }

    #[test]
    fn visits_each_parameter_once_per_round() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, t)| (t - 0.1 * i as f64).cos()).sum::<f64>();
        let r = rotosolve_minimize(f, &[0.0; 8], &RotosolveConfig::default()).unwrap();
        assert_eq!(r.order.len(), 32);
        for chunk in r.order.chunks(8) {
            let mut c = chunk.to_vec();
            c.sort();
            assert_eq!(c, (0..8).collect::<Vec<_>>());
        }
        for w in r.losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!((r.losses.last().unwrap() + 8.0).abs() < 1e-9);
    }

    #[test]
    fn zero_iterations_returns_init() {
        let config = RotosolveConfig { iterations: 0, ..RotosolveConfig::default() };
        let r = rotosolve_minimize(|x: &[f64]| x[0].cos(), &[0.4], &config).unwrap();
        assert_eq!(r.params, vec![0.4]);
        assert!(
            rotosolve_minimize(|x: &[f64]| x[0], &[0.4], &RotosolveConfig { samples_per_sweep: 3, ..config }).is_err()
        );
    }
}
