//! Conversions between the equivalent parameterizations of SOST and the
//! SWE bridge to SO.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `(τ, ε, ℓ)` triple. `τ = 0` denotes an SO certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateTriple {
    pub tau: f64,
    pub eps: f64,
    pub ell: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateTransform {
    /// From the tied form `ε = τ`: `ell` is the tied-form rate at
    /// `τ = min(τ̂, ε̂)` (see [`RateTransform::tied_shift`]); the result is a
    /// SOST triple for `(τ̂, ε̂)`.
    TiedToSost { tau_hat: f64, eps_hat: f64, ell: f64 },
    /// From SOST: `ell` is the SOST rate at `(τ, ε/2)`; the result holds for
    /// `t ≥ t₁+τ` with overshoot `1+ε`, rate `cℓ` where
    /// `(1+ε/2) exp(τcℓ) ≤ 1+ε`, `c ≤ 1`.
    SostToDelayed { tau: f64, eps: f64, ell: f64 },
    /// SWE bridge: `tau0` is the SWE window at `δ = ε/2` and `ell1` the
    /// delayed-form rate at `(τ₀, ε)`; the result is an SO triple with
    /// `ℓ = min(ℓ₁, log((1+ε)/(1+ε/2))/τ₀)`.
    SweBridge { eps: f64, tau0: f64, ell1: f64 },
}

impl RateTransform {
    /// The shift at which the tied-form rate must be taken.
    pub fn tied_shift(tau_hat: f64, eps_hat: f64) -> f64 {
        tau_hat.min(eps_hat)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn transform_rates(t: RateTransform) -> Result<RateTriple> {
    match t {
        RateTransform::TiedToSost { tau_hat, eps_hat, ell } => {
            positive("tau_hat", tau_hat)?;
            positive("eps_hat", eps_hat)?;
            positive("ell", ell)?;
            Ok(RateTriple { tau: tau_hat, eps: eps_hat, ell })
        }
        RateTransform::SostToDelayed { tau, eps, ell } => {
            positive("tau", tau)?;
            positive("eps", eps)?;
            positive("ell", ell)?;
            let c = (((1.0 + eps) / (1.0 + eps / 2.0)).ln() / (tau * ell)).min(1.0);
            Ok(RateTriple { tau, eps, ell: c * ell })
        }
        RateTransform::SweBridge { eps, tau0, ell1 } => {
            positive("eps", eps)?;
            positive("tau0", tau0)?;
            positive("ell1", ell1)?;
            let ell2 = ((1.0 + eps) / (1.0 + eps / 2.0)).ln() / tau0;
            Ok(RateTriple { tau: 0.0, eps, ell: ell1.min(ell2) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delayed_form_example() {
        let r = transform_rates(RateTransform::SostToDelayed { tau: 1.0, eps: 0.2, ell: 0.5 }).unwrap();
        let c = r.ell / 0.5;
        assert!((c - 2.0 * (12.0f64 / 11.0).ln()).abs() < 1e-15);
        assert!(1.1 * (0.5 * c).exp() <= 1.2 + 1e-15);
    }

    #[test]
    fn tied_shift_of_equal_values() {
        assert_eq!(RateTransform::tied_shift(0.3, 0.3), 0.3);
        let r = transform_rates(RateTransform::TiedToSost { tau_hat: 0.3, eps_hat: 0.3, ell: 0.2 }).unwrap();
        assert_eq!(r, RateTriple { tau: 0.3, eps: 0.3, ell: 0.2 });
    }

    #[test]
    fn bridge_takes_minimum() {
        let r = transform_rates(RateTransform::SweBridge { eps: 1.0, tau0: 1.0, ell1: 5.0 }).unwrap();
        assert!((r.ell - (2.0f64 / 1.5).ln()).abs() < 1e-15);
        assert!(transform_rates(RateTransform::SweBridge { eps: 1.0, tau0: 0.0, ell1: 5.0 }).is_err());
    }
}
