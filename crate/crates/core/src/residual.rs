//! Finite-difference consistency checks of `f'(t) = rhs(t)` along sampled
//! trajectories.
//!
//! The derivative is estimated by the central difference `D(h)` on a uniform
//! grid. Its truncation error `c h^2` is estimated from `D(2h) - D(h) = 3 c h^2`
//! and added to the base tolerance, so the allowed residual at each point is
//! `base + |D(2h) - D(h)|`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub base_tol: f64,
    pub checked: usize,
    /// Largest `|D(h) - rhs|`.
    pub max_residual: f64,
    /// Largest `|D(h) - rhs| - budget`; nonpositive on success.
    pub max_excess: f64,
    pub worst_time: f64,
    pub worst_label: String,
}

impl ResidualReport {
    pub fn new(base_tol: f64) -> Self {
        Self {
            base_tol,
            checked: 0,
            max_residual: 0.0,
            max_excess: f64::NEG_INFINITY,
            worst_time: f64::NAN,
            worst_label: String::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_excess <= 0.0
    }

    pub fn merge(&mut self, other: &ResidualReport) {
        self.checked += other.checked;
        self.max_residual = self.max_residual.max(other.max_residual);
        if other.max_excess > self.max_excess {
            self.max_excess = other.max_excess;
            self.worst_time = other.worst_time;
            self.worst_label = other.worst_label.clone();
        }
    }

    /// Adds the check of one scalar series against its claimed derivative.
    pub fn check_series(&mut self, label: &str, times: &[f64], values: &[f64], rhs: &[f64]) -> Result<()> {
        let h = uniform_step(times)?;
        if values.len() != times.len() || rhs.len() != times.len() {
            return Err(Error::Validation("series length does not match the time grid".into()));
        }
        for k in 2..times.len().saturating_sub(2) {
            let d1 = (values[k + 1] - values[k - 1]) / (2.0 * h);
            let d2 = (values[k + 2] - values[k - 2]) / (4.0 * h);
            let residual = (d1 - rhs[k]).abs();
            let excess = residual - (self.base_tol + (d2 - d1).abs());
            self.checked += 1;
            self.max_residual = self.max_residual.max(residual);
            if excess > self.max_excess || excess.is_nan() {
                self.max_excess = if excess.is_nan() { f64::INFINITY } else { excess };
                self.worst_time = times[k];
                self.worst_label = label.to_string();
            }
        }
        Ok(())
    }
}

/// Step of a uniform grid with at least five points.
pub fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 5 {
        return Err(Error::Validation(
            "finite-difference checks need at least 5 grid points".into(),
        ));
    }
    let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0));
    if !(h > 0.0) || !uniform {
        return Err(Error::Validation("finite-difference checks need a uniform time grid".into()));
    }
    Ok(h)
}

/// `points` equally spaced times on `[t0, t1]`, endpoints included.
pub fn linspace(t0: f64, t1: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![t0],
        _ => {
            let h = (t1 - t0) / (points - 1) as f64;
            let mut v: Vec<f64> = (0..points).map(|k| t0 + k as f64 * h).collect();
            v[points - 1] = t1;
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_derivative_passes_and_wrong_one_fails() {
        let times = linspace(0.0, 2.0, 201);
        let values: Vec<f64> = times.iter().map(|t| (3.0 * t).sin()).collect();
        let good: Vec<f64> = times.iter().map(|t| 3.0 * (3.0 * t).cos()).collect();
        let bad: Vec<f64> = good.iter().map(|v| v + 1e-4).collect();

        let mut r = ResidualReport::new(1e-6);
        r.check_series("sin", &times, &values, &good).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.checked, 197);

        let mut r = ResidualReport::new(1e-6);
        r.check_series("sin", &times, &values, &bad).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn rejects_non_uniform_grids() {
        assert!(uniform_step(&[0.0, 0.1, 0.3, 0.4, 0.5]).is_err());
        assert!(uniform_step(&[0.0, 0.1, 0.2]).is_err());
        assert!((uniform_step(&linspace(0.0, 1.0, 11)).unwrap() - 0.1).abs() < 1e-15);
    }
}
