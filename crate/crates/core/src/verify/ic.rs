//! Interior contractivity: boundary repulsion plus a negative measure bound
//! on an interior shrink.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::norms::NormFamily;
use super::query::{Property, Verdict, Witness, WitnessKind};
use super::sampling::default_region_grid;
use crate::domain::{DomainKind, DomainSpec};
use crate::error::{Error, Result};
use crate::measures::sup_measure_over_region;
use crate::models::SystemModel;
use crate::simulate::{integrate, IntegratorConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcConfig {
    /// Facet starts must be inside by this time.
    pub probe_time: f64,
    /// Minimum boundary distance that counts as strict entry.
    pub probe_threshold: f64,
    /// Facet starts are followed up to this time.
    pub probe_horizon: f64,
    /// Shrink depth as a fraction of the narrowest axis.
    pub shrink_factor: f64,
    pub facet_points: usize,
    pub tol: f64,
}

impl Default for IcConfig {
    fn default() -> Self {
        Self { probe_time: 0.1, probe_threshold: 1e-6, probe_horizon: 10.0, shrink_factor: 1e-3, facet_points: 9, tol: 1e-9 }
    }
}

/// Checks the two IC conditions on `region` (the model domain by default).
/// A certified verdict carries the implied ST certificate
/// `(τ = probe_time, ℓ = −sup μ)` in `details.st` and as its rate.
pub fn check_ic(model: &SystemModel, region: Option<&DomainSpec>, norms: &NormFamily, cfg: &IcConfig) -> Result<Verdict> {
    if !model.is_time_invariant() {
        return Err(Error::Query(format!(
            "IC needs a time-invariant model; `{}` depends on t (the time-varying analogue of IC ⇒ ST fails)",
            model.name()
        )));
    }
    let region = region.unwrap_or(model.domain());
    if region.kind == DomainKind::PositiveOrthantBox || region.clock_axis.is_some() {
        return Err(Error::Query("IC needs a compact box region".into()));
    }
    if region.dim() != model.dim() {
        return Err(Error::Dimension { expected: model.dim(), got: region.dim() });
    }
    let limit = norms.limit()?;
    let mut v = Verdict::new(model.name(), Property::Ic, limit.label(), 100.0 * cfg.tol);
    let icfg = IntegratorConfig::with_tol(cfg.tol);

    // (a) boundary starts move strictly inside and stay there.
    let starts = region.facet_points(cfg.facet_points, 0.0, 0.0);
    let probes = starts
        .par_iter()
        .map(|x| -> Result<(f64, f64)> {
            let tr = integrate(model, 0.0, x, cfg.probe_horizon, &icfg)?;
            let mut worst = (f64::INFINITY, cfg.probe_horizon);
            for (i, s) in tr.states().enumerate() {
                let t = tr.times()[i];
                if t >= cfg.probe_time {
                    let d = region.boundary_distance(s) - region.excursion(s);
                    if d < worst.0 {
                        worst = (d, t);
                    }
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut d_hat, mut at) = (f64::INFINITY, 0);
    for (i, &(d, _)) in probes.iter().enumerate() {
        if d < d_hat {
            (d_hat, at) = (d, i);
        }
    }
    v.samples = starts.len();
    v.detail("probe_distance", d_hat);
    v.detail("probe_time", cfg.probe_time);
    if !(d_hat >= cfg.probe_threshold) {
        v.worst_margin = cfg.probe_threshold - d_hat;
        v.notes.push(format!("a boundary start is within {d_hat} of the boundary after t = {}", cfg.probe_time));
        v.falsify(Witness {
            kind: WitnessKind::Boundary,
            t1: 0.0,
            t2: probes[at].1,
            a: starts[at].clone(),
            b: starts[at].clone(),
            margin: cfg.probe_threshold - d_hat,
        });
        return Ok(v);
    }

    // (b) negative measure on an interior shrink.
    let min_width = (0..region.dim())
        .map(|i| region.upper[i] - region.lower[i])
        .fold(f64::INFINITY, f64::min);
    let depth = (cfg.shrink_factor * min_width).min(d_hat);
    let inner = region.shrink(depth)?;
    let norm = norms.at(depth)?;
    let mut grid = default_region_grid(model).with_refinement(2, 16, 1);
    grid.open_margin = 0.0;
    let bound = sup_measure_over_region(model, &inner, &norm, &grid)?;
    v.norm = norm.label();
    v.worst_margin = bound.sup_measure;
    v.detail("shrink_depth", depth);
    v.detail("region_bound", &bound);
    if bound.sup_measure >= 0.0 {
        v.falsify(Witness {
            kind: WitnessKind::MeasureBound,
            t1: bound.argmax_time,
            t2: bound.argmax_time,
            a: bound.argmax_point.clone(),
            b: bound.argmax_point.clone(),
            margin: bound.sup_measure,
        });
        return Ok(v);
    }
    let c = -bound.sup_measure;
    v.rate = Some(c);
    v.detail("st", Property::St { tau: cfg.probe_time, ell: Some(c) });
    Ok(v)
}
