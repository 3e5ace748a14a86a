use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::random::stream_rng;
use crate::{Error, Result};

/// Gain schedule `a_k = a/(A + k + 1)^α`, `c_k = c/(k + 1)^γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpsaConfig {
    /// Step gain; `None` calibrates it so the first update moves parameters
    /// by about `target_first_step`.
    pub a: Option<f64>,
    pub c: f64,
    pub big_a: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub target_first_step: f64,
    /// Gradient estimates averaged during calibration.
    pub calibration_samples: usize,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        Self {
            a: None,
            c: 0.1,
            big_a: 10.0,
            alpha: 0.602,
            gamma: 0.101,
            max_iterations: 100,
            seed: 0,
            target_first_step: 0.1,
            calibration_samples: 10,
        }
    }
}

impl SpsaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("SPSA: {m}")));
        if let Some(a) = self.a {
            if !(a > 0.0) {
                return bad("a must be positive");
            }
        }
        if !(self.c > 0.0) {
            return bad("c must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) || !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("alpha and gamma must lie in (0, 1]");
        }
        if self.big_a < 0.0 {
            return bad("A must be non-negative");
        }
        if self.a.is_none() && (self.calibration_samples == 0 || !(self.target_first_step > 0.0)) {
            return bad("calibration needs samples and a positive target step");
        }
        Ok(())
    }
}

/// SPSA stepper holding the schedule state and perturbation stream.
#[derive(Clone, Debug)]
pub struct Spsa {
    config: SpsaConfig,
    a: f64,
    k: usize,
    rng: ChaCha8Rng,
}

impl Spsa {
    pub fn new(config: SpsaConfig) -> Result<Self> {
        config.validate()?;
        let rng = stream_rng(config.seed, 0x5b5a);
        Ok(Self { a: config.a.unwrap_or(0.0), config, k: 0, rng })
    }

    pub fn gain(&self) -> f64 {
        self.a
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    fn perturbation(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| if self.rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()
    }

    /// Sets `a` from the mean gradient magnitude at `x`; returns the number
    /// of objective evaluations spent.
    pub fn calibrate<F: FnMut(&[f64]) -> f64>(&mut self, f: &mut F, x: &[f64]) -> usize {
        let c = self.config.c;
        let mut total = 0.0;
        let mut count = 0usize;
        let mut evaluations = 0;
        for _ in 0..self.config.calibration_samples {
            let delta = self.perturbation(x.len());
            let plus: Vec<f64> = x.iter().zip(&delta).map(|(v, d)| v + c * d).collect();
            let minus: Vec<f64> = x.iter().zip(&delta).map(|(v, d)| v - c * d).collect();
            let diff = f(&plus) - f(&minus);
            evaluations += 2;
            if diff.is_finite() {
                total += (diff / (2.0 * c)).abs();
                count += 1;
            }
        }
        let mean = if count > 0 { total / count as f64 } else { 0.0 };
        let scale = (self.config.big_a + 1.0).powf(self.config.alpha);
        self.a = if mean > 1e-12 {
            self.config.target_first_step * scale / mean
        } else {
            self.config.target_first_step * scale
        };
        evaluations
    }

    /// One update of `x` in place. Returns the two perturbed losses; the
    /// update is skipped when either is non-finite.
    pub fn step<F: FnMut(&[f64]) -> f64>(&mut self, f: &mut F, x: &mut [f64]) -> (f64, f64) {
        let k = self.k as f64;
        let ak = self.a / (self.config.big_a + k + 1.0).powf(self.config.alpha);
        let ck = self.config.c / (k + 1.0).powf(self.config.gamma);
        let delta = self.perturbation(x.len());
        let plus: Vec<f64> = x.iter().zip(&delta).map(|(v, d)| v + ck * d).collect();
        let minus: Vec<f64> = x.iter().zip(&delta).map(|(v, d)| v - ck * d).collect();
        let fp = f(&plus);
        let fm = f(&minus);
        self.k += 1;
        if fp.is_finite() && fm.is_finite() {
            let g = (fp - fm) / (2.0 * ck);
            for (v, d) in x.iter_mut().zip(&delta) {
                // Δ entries are ±1, so 1/Δ = Δ.
                *v -= ak * g * d;
            }
        }
        (fp, fm)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpsaResult {
    pub params: Vec<f64>,
    /// `(f(θ+cΔ), f(θ−cΔ))` per iteration.
    pub history: Vec<(f64, f64)>,
    /// Evaluations spent by the iterations (two each).
    pub evaluations: usize,
    /// Evaluations spent calibrating the gain.
    pub calibration_evaluations: usize,
    pub gain: f64,
}

/// Runs `max_iterations` SPSA updates from `init`.
pub fn spsa_minimize<F>(mut f: F, init: &[f64], config: &SpsaConfig) -> Result<SpsaResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut spsa = Spsa::new(config.clone())?;
    let mut x = init.to_vec();
    let mut calibration_evaluations = 0;
    let mut history = Vec::with_capacity(config.max_iterations);
    if config.max_iterations > 0 && config.a.is_none() {
        calibration_evaluations = spsa.calibrate(&mut f, &x);
    }
    for _ in 0..config.max_iterations {
        history.push(spsa.step(&mut f, &mut x));
    }
    Ok(SpsaResult { params: x, evaluations: 2 * history.len(), history, calibration_evaluations, gain: spsa.gain() })
}
