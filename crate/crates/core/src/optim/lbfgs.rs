use std::collections::VecDeque;

use super::finite;
use crate::{Error, Result};

/// Settings for [`quasi_newton_minimize`].
#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsConfig {
    /// Number of stored curvature pairs.
    pub memory: usize,
    /// Stop when the projected gradient's max-norm falls below this.
    pub gtol: f64,
    /// Stop when `(f_k − f_{k+1}) / max(|f_k|, |f_{k+1}|, 1)` falls below this.
    pub ftol: f64,
    pub max_iterations: usize,
    /// Absolute central-difference step.
    pub fd_step: f64,
    /// Optional per-coordinate box bounds.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self { memory: 10, gtol: 1e-5, ftol: 2.2e-9, max_iterations: 1000, fd_step: 1e-6, bounds: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsResult {
    pub params: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Loss after every accepted iterate, starting with the initial point.
    pub history: Vec<f64>,
}

/// Central finite-difference gradient.
pub fn central_gradient<F>(f: &mut F, x: &[f64], h: f64, evaluations: &mut usize) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = finite(f(&probe), "objective")?;
        probe[i] = x[i] - h;
        let fm = finite(f(&probe), "objective")?;
        probe[i] = x[i];
        *evaluations += 2;
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

fn project(x: &mut [f64], bounds: Option<&[(f64, f64)]>) {
    if let Some(b) = bounds {
        for (v, &(lo, hi)) in x.iter_mut().zip(b) {
            *v = v.clamp(lo, hi);
        }
    }
}

/// Max-norm of the projected gradient: components pushing against an active
/// bound do not count.
fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: Option<&[(f64, f64)]>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let gi = match bounds {
            Some(b) => {
                let (lo, hi) = b[i];
                (x[i] - g[i]).clamp(lo, hi) - x[i]
            }
            None => -g[i],
        };
        worst = worst.max(gi.abs());
    }
    worst
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS with central-difference gradients and optional box
/// bounds enforced by projection. Aborts on a non-finite objective value.
pub fn quasi_newton_minimize<F>(mut f: F, init: &[f64], config: &LbfgsConfig) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> f64,
{
    if init.is_empty() {
        return Err(Error::Empty("parameter vector"));
    }
    let bounds = config.bounds.as_deref();
    if let Some(b) = bounds {
        if b.len() != init.len() {
            return Err(Error::DimensionMismatch { expected: init.len(), found: b.len() });
        }
        if b.iter().any(|&(lo, hi)| !(lo <= hi)) {
            return Err(Error::Config("lower bound exceeds upper bound".into()));
        }
    }
    let mut x = init.to_vec();
    project(&mut x, bounds);
    let mut evaluations = 1;
    let mut fx = finite(f(&x), "objective at initial point")?;
    let mut g = central_gradient(&mut f, &x, config.fd_step, &mut evaluations)?;
    let mut history = vec![fx];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut converged = projected_gradient_norm(&x, &g, bounds) < config.gtol;

    while !converged && iterations < config.max_iterations {
        // Two-loop recursion for the search direction.
        let mut q: Vec<f64> = g.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let scale = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= scale);
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        if dot(&dir, &g) >= 0.0 {
            dir = g.iter().map(|v| -v).collect();
            pairs.clear();
        }
        if pairs.is_empty() {
            // First step or reset: limit the trial move to unit length.
            let norm = dot(&dir, &dir).sqrt();
            if norm > 1.0 {
                dir.iter_mut().for_each(|v| *v /= norm);
            }
        }

        // Backtracking Armijo search along the projected path.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            project(&mut trial, bounds);
            let ft = finite(f(&trial), "objective during line search")?;
            evaluations += 1;
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if ft <= fx + 1e-4 * dot(&g, &moved) {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // No decrease along the direction: stationary to working precision.
            converged = true;
            break;
        };
        iterations += 1;
        let g_new = central_gradient(&mut f, &x_new, config.fd_step, &mut evaluations)?;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            pairs.push_back((s, y, 1.0 / sy));
            if pairs.len() > config.memory {
                pairs.pop_front();
            }
        }
        let rel = (fx - f_new) / fx.abs().max(f_new.abs()).max(1.0);
        x = x_new;
        fx = f_new;
        g = g_new;
        history.push(fx);
        if rel <= config.ftol || projected_gradient_norm(&x, &g, bounds) < config.gtol {
            converged = true;
        }
    }
    Ok(LbfgsResult { params: x, loss: fx, iterations, evaluations, converged, history })
}
