//! Nested contractivity: entry into nested subdomains, contraction inside
//! each under its own norm, convergence of those norms and non-expansion
//! in the limit norm.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::norms::NormFamily;
use super::property::check_property;
use super::query::{Property, PropertyQuery, SamplePlan, Verdict, Witness, WitnessKind};
use super::sampling::default_region_grid;
use super::swe::{so_via_swe, SoBridge};
use crate::domain::{linspace, NestedFamily};
use crate::error::{Error, Result};
use crate::measures::{sup_measure_over_region, RegionBound};
use crate::models::SystemModel;
use crate::simulate::integrate_with_stops;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NcConfig {
    /// Shifts `τ` at which entry depths `ζ̂(τ)` are measured.
    pub entry_taus: Vec<f64>,
    /// Trajectories must stay in `Ω_ζ̂(τ)` over `[t₁+τ, t₁+τ+entry_horizon]`.
    pub entry_horizon: f64,
    /// Family parameters at which the measure bound is evaluated.
    pub zetas: Vec<f64>,
    /// Time windows `[0, W]` for the drift test on time-varying models.
    pub drift_windows: Vec<f64>,
    /// Largest accepted norm deviation at the smallest `ζ`.
    pub deviation_tol: f64,
    /// Parameters of the SOST and SO certificates that are cross-checked.
    pub tau: f64,
    pub eps: f64,
    /// Lipschitz constant for the SO upgrade (estimated when absent).
    pub lipschitz: Option<f64>,
}

impl Default for NcConfig {
    fn default() -> Self {
        Self {
            entry_taus: vec![0.1, 0.5, 1.0, 2.0],
            entry_horizon: 50.0,
            zetas: vec![0.5, 0.1, 0.01, 1e-3, 1e-4],
            drift_windows: vec![10.0, 100.0, 1000.0],
            deviation_tol: 1e-3,
            tau: 1.0,
            eps: 1.0,
            lipschitz: None,
        }
    }
}

/// The NC verdict plus the certificates it implies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NcOutcome {
    pub nc: Verdict,
    /// SOST at `(τ, ε)` under the limit norm, rate estimated on samples.
    pub sost: Option<Verdict>,
    /// SO obtained from SOST through SWE.
    pub so: Option<SoBridge>,
}

impl NcOutcome {
    pub fn sost_certified(&self) -> bool {
        self.nc.is_certified() && self.sost.as_ref().is_some_and(Verdict::is_certified)
    }

    pub fn so_certified(&self) -> bool {
        self.sost_certified() && self.so.as_ref().is_some_and(SoBridge::so_certified)
    }
}

fn region_times(model: &SystemModel, window: f64) -> Vec<f64> {
    if model.is_time_invariant() {
        vec![0.0]
    } else {
        let mut ts = linspace(0.0, window, 41);
        ts.extend(linspace(0.0, window.min(10.0), 21));
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

/// Smallest family depth reached from `starts` over `[t₁+τ, t₁+τ+H]`.
fn entry_depth(model: &SystemModel, plan: &SamplePlan, tau: f64, horizon: f64) -> Result<(f64, Witness)> {
    let domain = model.domain();
    let cfg = plan.integrator();
    let mut starts = Vec::new();
    for (k, &t1) in plan.start_times().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed ^ (k as u64 + 77));
        for x in domain.corners(0.0, t1) {
            starts.push((t1, x));
        }
        for x in domain.facet_points(3, 0.0, t1) {
            starts.push((t1, x));
        }
        for _ in 0..plan.n_pairs {
            starts.push((t1, domain.sample_initial(&mut rng, plan.boundary_margin, t1)));
        }
    }
    let depths = starts
        .par_iter()
        .map(|(t1, x)| -> Result<(f64, f64)> {
            let stops: Vec<f64> = linspace(t1 + tau, t1 + tau + horizon, 11);
            let tr = integrate_with_stops(model, *t1, x, &stops, &cfg)?;
            let mut worst = (f64::INFINITY, t1 + tau);
            for (i, s) in tr.states().enumerate() {
                let t = tr.times()[i];
                if t >= t1 + tau {
                    let d = domain.family_depth(s, *t1)?;
                    if d < worst.0 {
                        worst = (d, t);
                    }
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = (f64::INFINITY, 0usize);
    for (i, &(d, _)) in depths.iter().enumerate() {
        if d < best.0 {
            best = (d, i);
        }
    }
    let (t1, x) = &starts[best.1];
    let w = Witness { kind: WitnessKind::Boundary, t1: *t1, t2: depths[best.1].1, a: x.clone(), b: x.clone(), margin: -best.0 };
    Ok((best.0, w))
}

/// Sup of the measure on `Ω_ζ` over `[0, window]` (anchored at every start
/// time for clock families).
fn measure_on_member(
    model: &SystemModel,
    norms: &NormFamily,
    plan: &SamplePlan,
    zeta: f64,
    window: f64,
) -> Result<RegionBound> {
    let domain = model.domain();
    let norm = norms.at(zeta)?;
    let anchors = match domain.nested_family {
        Some(NestedFamily::ClockOffset { .. }) => plan.start_times(),
        _ => vec![0.0],
    };
    let mut grid = default_region_grid(model).with_times(region_times(model, window)).with_refinement(1, 16, plan.seed);
    grid.open_margin = 0.0;
    let mut worst: Option<RegionBound> = None;
    for t1 in anchors {
        let member = domain.family_member(zeta, t1)?;
        let b = sup_measure_over_region(model, &member, &norm, &grid)?;
        if worst.as_ref().is_none_or(|w| b.sup_measure > w.sup_measure) {
            worst = Some(b);
        }
    }
    Ok(worst.expect("at least one anchor"))
}

/// Runs the four NC steps on the model's attached nested family and, when
/// they pass, cross-checks the implied SOST certificate and its SO upgrade.
pub fn certify_sost_via_nc(model: &SystemModel, norms: &NormFamily, plan: &SamplePlan, cfg: &NcConfig) -> Result<NcOutcome> {
    plan.validate()?;
    let domain = model.domain();
    if domain.nested_family.is_none() {
        return Err(Error::Query(format!("model `{}` declares no nested family", model.name())));
    }
    let mut zetas = cfg.zetas.clone();
    if zetas.is_empty() || zetas.iter().any(|&z| !(z > 0.0 && z <= 0.5)) {
        return Err(Error::Query("family parameters must lie in (0, 1/2]".into()));
    }
    zetas.sort_by(|a, b| b.total_cmp(a));
    for w in zetas.windows(2) {
        let (outer, inner) = (domain.family_member(w[1], 0.0)?, domain.family_member(w[0], 0.0)?);
        if !inner.is_subset_of(&outer) {
            return Err(Error::Precondition(format!("family is not nested between ζ = {} and ζ = {}", w[0], w[1])));
        }
    }
    let limit = norms.limit()?;
    let mut v = Verdict::new(model.name(), Property::Nc, limit.label(), plan.slack());
    v.plan = Some(plan.clone());
    let out = |nc: Verdict| Ok(NcOutcome { nc, sost: None, so: None });

    // (i) entry depths.
    let mut entry = Vec::new();
    for &tau in &cfg.entry_taus {
        let (d, w) = entry_depth(model, plan, tau, cfg.entry_horizon)?;
        entry.push((tau, d.min(0.5)));
        if !(d > 0.0) {
            v.detail("entry", &entry);
            v.notes.push(format!("trajectories do not enter any Ω_ζ within τ = {tau}"));
            v.falsify(w);
            return out(v);
        }
    }
    v.detail("entry", &entry);
    zetas.extend(entry.iter().map(|&(_, z)| z));
    zetas.sort_by(|a, b| b.total_cmp(a));
    zetas.dedup();

    // (ii) contraction on each member.
    let windows: Vec<f64> = if model.is_time_invariant() { vec![0.0] } else { cfg.drift_windows.clone() };
    let mut bounds = Vec::new();
    for &zeta in &zetas {
        let sups = windows
            .iter()
            .map(|&w| measure_on_member(model, norms, plan, zeta, w))
            .collect::<Result<Vec<_>>>()?;
        let last = sups.last().expect("nonempty").clone();
        let series: Vec<f64> = sups.iter().map(|b| b.sup_measure).collect();
        bounds.push(serde_json::json!({ "zeta": zeta, "norm": norms.label(zeta)?, "sup_measure": series }));
        let drifting = series.len() >= 3 && series.windows(2).all(|s| s[1] > 0.5 * s[0]);
        if last.sup_measure >= 0.0 || drifting {
            v.detail("measure_bounds", &bounds);
            v.notes.push(if drifting {
                format!("on Ω_{zeta} the measure bound creeps toward 0 as the time window grows: {series:?}")
            } else {
                format!("on Ω_{zeta} the measure reaches {}", last.sup_measure)
            });
            v.worst_margin = last.sup_measure;
            v.falsify(Witness {
                kind: WitnessKind::MeasureBound,
                t1: last.argmax_time,
                t2: last.argmax_time,
                a: last.argmax_point.clone(),
                b: last.argmax_point.clone(),
                margin: last.sup_measure,
            });
            return out(v);
        }
    }
    v.detail("measure_bounds", &bounds);

    // (iii) norm convergence.
    let n = model.pair_dim();
    let mut vectors: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed ^ 0x5EED);
    for _ in 0..32 {
        let a = model.pair_coords(&domain.sample_initial(&mut rng, plan.boundary_margin, 0.0));
        let b = model.pair_coords(&domain.sample_initial(&mut rng, plan.boundary_margin, 0.0));
        vectors.push(a.iter().zip(&b).map(|(x, y)| x - y).collect());
    }
    let devs = zetas.iter().map(|&z| Ok((z, norms.deviation(z, &vectors)?))).collect::<Result<Vec<_>>>()?;
    v.detail("norm_deviation", &devs);
    let monotone = devs.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-15);
    let smallest = devs.last().expect("nonempty").1;
    if !monotone || smallest > cfg.deviation_tol {
        v.notes.push(format!("norm deviation does not decrease to below {}: {devs:?}", cfg.deviation_tol));
        v.worst_margin = smallest;
        v.falsify(Witness { kind: WitnessKind::MeasureBound, t1: 0.0, t2: 0.0, a: vec![], b: vec![], margin: smallest });
        return out(v);
    }

    // (iv) non-expansion in the limit norm.
    let ne = check_property(model, &PropertyQuery::new(Property::Ne, limit.clone()).with_plan(plan.clone()))?;
    v.samples = ne.samples;
    v.worst_margin = ne.worst_margin;
    v.binding = ne.binding.clone();
    if let Some(w) = ne.witness.clone() {
        v.notes.push("not non-expansive in the limit norm".into());
        v.falsify(w);
        return out(v);
    }

    let q = PropertyQuery::new(Property::Sost { tau: cfg.tau, eps: cfg.eps, ell: None }, limit.clone()).with_plan(plan.clone());
    let mut sost = check_property(model, &q)?;
    sost.notes.push("implied by the nested-contraction certificate; rate estimated on samples".into());
    if !sost.is_certified() {
        v.notes.push("the implied SOST certificate is contradicted by sampling".into());
    }
    let so = so_via_swe(model, cfg.eps, &limit, plan, cfg.lipschitz)?;
    Ok(NcOutcome { nc: v, sost: Some(sost), so: Some(so) })
}
