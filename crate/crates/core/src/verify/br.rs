//! Lower bounds on component velocities near the zero facets.

use serde::Serialize;

use super::query::{Property, Verdict, Witness, WitnessKind};
use super::sampling::default_region_grid;
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::measures::{sup_over_region, RegionGrid};
use crate::models::SystemModel;

/// Smallest `K̂` that counts as a positive lower bound.
pub const BR_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlabMin {
    pub axis: usize,
    pub min_velocity: f64,
    pub argmin: Vec<f64>,
    pub time: f64,
}

/// For each state axis `k`, grids the slab `{x_k ∈ [0, Δ], x_i ≥ δ for
/// i < k}` and takes the minimum of `f_k`. Certified iff every slab minimum
/// exceeds [`BR_THRESHOLD`]; the rate is `K̂ = min_k`.
pub fn check_br(
    model: &SystemModel,
    delta: f64,
    big_delta: f64,
    grid: Option<&RegionGrid>,
    times: &[f64],
) -> Result<Verdict> {
    let property = Property::Br { delta, big_delta };
    property.validate()?;
    let domain = model.domain();
    let axes: Vec<usize> = (0..model.dim()).filter(|&i| domain.clock_axis != Some(i)).collect();
    for &k in &axes {
        if !(domain.lower[k] <= 0.0 && domain.upper[k] > 0.0) {
            return Err(Error::Query(format!(
                "BR needs every state axis to contain its zero facet; axis {k} spans [{}, {}]",
                domain.lower[k], domain.upper[k]
            )));
        }
    }
    let mut grid = grid.cloned().unwrap_or_else(|| default_region_grid(model));
    grid.open_margin = 0.0;
    if !times.is_empty() {
        grid.t_samples = times.to_vec();
    }
    let mut v = Verdict::new(model.name(), property, "-".into(), BR_THRESHOLD);
    let mut slabs = Vec::new();
    for (pos, &k) in axes.iter().enumerate() {
        let mut lower = domain.lower.clone();
        let mut upper = domain.upper.clone();
        lower[k] = domain.lower[k].max(0.0);
        upper[k] = big_delta.min(domain.upper[k]);
        for &i in &axes[..pos] {
            lower[i] = lower[i].max(delta);
            if lower[i] > upper[i] {
                return Err(Error::Query(format!("δ = {delta} exceeds the extent of axis {i}")));
            }
        }
        let mut slab = DomainSpec::closed_box(lower, upper)?;
        if let Some(c) = domain.clock_axis {
            slab = slab.with_clock_axis(c)?;
        }
        let bound = sup_over_region(model, &slab, &grid, |t, x| Ok(-model.eval(t, x)[k]))?;
        v.samples += bound.evaluations;
        slabs.push(SlabMin { axis: k, min_velocity: -bound.sup_measure, argmin: bound.argmax_point, time: bound.argmax_time });
    }
    let worst = slabs
        .iter()
        .min_by(|a, b| a.min_velocity.total_cmp(&b.min_velocity))
        .expect("at least one state axis");
    let k_hat = worst.min_velocity;
    v.rate = Some(k_hat);
    v.worst_margin = BR_THRESHOLD - k_hat;
    if k_hat <= BR_THRESHOLD {
        v.falsify(Witness {
            kind: WitnessKind::Slab,
            t1: worst.time,
            t2: worst.time,
            a: worst.argmin.clone(),
            b: worst.argmin.clone(),
            margin: BR_THRESHOLD - k_hat,
        });
    }
    v.detail("slabs", &slabs);
    Ok(v)
}
