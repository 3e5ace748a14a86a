use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Minimum, quartiles and maximum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile (`h = (n − 1)·p`) of sorted data.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn five_number_summary(values: &[f64]) -> Result<FiveNumber> {
    if values.is_empty() {
        return Err(Error::Empty("summary input"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(FiveNumber {
        min: v[0],
        q1: quantile_type7(&v, 0.25),
        median: quantile_type7(&v, 0.5),
        q3: quantile_type7(&v, 0.75),
        max: v[v.len() - 1],
    })
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_values() {
        let s = five_number_summary(&[0.8, 0.9, 1.0, 0.85, 0.95]).unwrap();
        assert_eq!((s.min, s.median, s.max), (0.8, 0.9, 1.0));
        assert!((s.q1 - 0.85).abs() < 1e-15 && (s.q3 - 0.95).abs() < 1e-15);
        let s = five_number_summary(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((s.q1 - 1.75).abs() < 1e-15 && (s.median - 2.5).abs() < 1e-15 && (s.q3 - 3.25).abs() < 1e-15);
        assert!(five_number_summary(&[]).is_err());
    }

    #[test]
    fn moments() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }
}
