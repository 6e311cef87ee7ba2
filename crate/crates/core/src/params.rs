use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transmission multiplier `tau` and recovery rate `gamma`.
///
/// Zero rates are accepted so that degenerate instances (pure decay, no
/// recovery) can be integrated; steady-state analysis requires both positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    tau: f64,
    gamma: f64,
}

impl EpidemicParams {
    pub fn new(tau: f64, gamma: f64) -> Result<Self> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::Validation(format!("tau must be finite and >= 0, got {tau}")));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::Validation(format!(
                "gamma must be finite and >= 0, got {gamma}"
            )));
        }
        Ok(Self { tau, gamma })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `gamma / tau`; infinite when `tau == 0`.
    pub fn alpha(&self) -> f64 {
        self.gamma / self.tau
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(tau, self.gamma)
    }

    pub(crate) fn require_positive(&self) -> Result<()> {
        if self.tau > 0.0 && self.gamma > 0.0 {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "steady-state analysis needs tau > 0 and gamma > 0 (tau = {}, gamma = {})",
                self.tau, self.gamma
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_is_ratio() {
        let p = EpidemicParams::new(0.5, 2.0).unwrap();
        assert_eq!(p.alpha(), 4.0);
        assert!(EpidemicParams::new(0.0, 1.0).unwrap().alpha().is_infinite());
        assert!(EpidemicParams::new(-1.0, 1.0).is_err());
        assert!(EpidemicParams::new(1.0, f64::NAN).is_err());
        assert!(EpidemicParams::new(0.0, 1.0).unwrap().require_positive().is_err());
    }
}
