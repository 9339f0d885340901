//! Small expansion over short windows.

use serde::Serialize;

use super::property::{check_norm, check_property, run_shape, Shape};
use super::query::{Property, PropertyQuery, SamplePlan, Status, Verdict};
use super::rates::{transform_rates, RateTransform};
use super::sampling::default_region_grid;
use crate::error::{Error, Result};
use crate::measures::{sup_over_region, MeasureSpec, RegionBound};
use crate::models::SystemModel;

/// Grid searched for `τ₀` when no Lipschitz constant is known.
const TAU0_GRID: [f64; 11] = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125, 0.0009765625];

/// Sup of the induced norm of the Jacobian over the model's sampling box.
pub fn lipschitz_estimate(model: &SystemModel, norm: &MeasureSpec, plan: &SamplePlan) -> Result<RegionBound> {
    check_norm(model, norm)?;
    let mut grid = default_region_grid(model).with_times(plan.start_times());
    grid.open_margin = plan.boundary_margin;
    sup_over_region(model, model.domain(), &grid, |t, x| norm.induced_norm(&model.pair_jacobian(t, x)))
}

/// Checks `d(t) ≤ (1+δ)|a−b|` for `t ∈ [t₀, t₀+τ₀]`. With a Lipschitz
/// constant `L` (given, or declared by the model) the window is
/// `τ₀ = log(1+δ)/L`; otherwise the largest passing grid value is taken.
pub fn check_swe(
    model: &SystemModel,
    delta: f64,
    norm: &MeasureSpec,
    plan: &SamplePlan,
    lipschitz: Option<f64>,
) -> Result<Verdict> {
    let property = Property::Swe { delta };
    property.validate()?;
    plan.validate()?;
    check_norm(model, norm)?;
    let run = |tau0: f64| -> Result<Verdict> {
        let mut v = run_shape(model, &property, norm, plan, Shape::swe(delta, tau0))?;
        v.rate = None;
        v.detail("tau0", tau0);
        Ok(v)
    };
    if let Some(l) = lipschitz.or(model.lipschitz_bound()) {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Query(format!("Lipschitz constant must be positive, got {l}")));
        }
        let mut v = run((1.0 + delta).ln() / l)?;
        v.detail("lipschitz", l);
        return Ok(v);
    }
    let mut last = None;
    for &tau0 in &TAU0_GRID {
        let v = run(tau0)?;
        if v.status == Status::Certified {
            return Ok(v);
        }
        last = Some(v);
    }
    let mut v = last.expect("grid nonempty");
    v.notes.push("no window on the search grid passes".into());
    Ok(v)
}

/// Evidence chain for SO obtained from SWE and SOST.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoBridge {
    /// SWE at `δ = ε/2`, giving the window `τ₀`.
    pub swe: Verdict,
    /// Delayed-form SOST at `(τ₀, ε)` in estimate mode, giving `ℓ₁`.
    pub delayed: Option<Verdict>,
    /// SO at `ε` checked with the bridged rate.
    pub so: Option<Verdict>,
}

impl SoBridge {
    pub fn so_certified(&self) -> bool {
        self.so.as_ref().is_some_and(Verdict::is_certified)
    }
}

/// Upgrades SOST to SO for an SWE system: takes `τ₀` from SWE at `ε/2`,
/// estimates the delayed-form rate `ℓ₁` at `(τ₀, ε)`, bridges to
/// `ℓ = min(ℓ₁, log((1+ε)/(1+ε/2))/τ₀)` and checks SO at that rate.
pub fn so_via_swe(
    model: &SystemModel,
    eps: f64,
    norm: &MeasureSpec,
    plan: &SamplePlan,
    lipschitz: Option<f64>,
) -> Result<SoBridge> {
    let swe = check_swe(model, eps / 2.0, norm, plan, lipschitz)?;
    if !swe.is_certified() {
        return Ok(SoBridge { swe, delayed: None, so: None });
    }
    let tau0 = swe.details["tau0"].as_f64().expect("tau0 recorded");
    let q = |property| PropertyQuery::new(property, norm.clone()).with_plan(plan.clone());
    let delayed = check_property(model, &q(Property::SostDelayed { tau: tau0, eps, ell: None }))?;
    let Some(ell1) = delayed.rate.filter(|_| delayed.is_certified()) else {
        return Ok(SoBridge { swe, delayed: Some(delayed), so: None });
    };
    let triple = transform_rates(RateTransform::SweBridge { eps, tau0, ell1 })?;
    let mut so = check_property(model, &q(Property::So { eps, ell: Some(triple.ell) }))?;
    so.detail("bridge", triple);
    Ok(SoBridge { swe, delayed: Some(delayed), so: Some(so) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{bio_circuit, linear_decay_system, BioParams};

    fn quick() -> SamplePlan {
        SamplePlan::default().with_pairs(4)
    }

    #[test]
    fn linear_decay_unit_window() {
        let m = linear_decay_system();
        let v = check_swe(&m, std::f64::consts::E - 1.0, &MeasureSpec::l1(), &quick(), None).unwrap();
        assert!(v.is_certified());
        assert!((v.details["tau0"].as_f64().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bio_with_jacobian_bound() {
        let p = BioParams::new(vec![1.0, 1.0], 2.0).unwrap();
        let m = bio_circuit(p).unwrap();
        let l = lipschitz_estimate(&m, &MeasureSpec::l1(), &quick()).unwrap().sup_measure;
        assert!(l >= 2.0 - 1e-12, "{l}");
        let v = check_swe(&m, 0.1, &MeasureSpec::l1(), &quick(), Some(l)).unwrap();
        assert!(v.is_certified());
        assert!((v.details["tau0"].as_f64().unwrap() - 1.1f64.ln() / l).abs() < 1e-15);
    }

    #[test]
    fn bridge_on_linear_decay() {
        let b = so_via_swe(&linear_decay_system(), 1.0, &MeasureSpec::l1(), &quick(), None).unwrap();
        assert!(b.so_certified());
    }
}
