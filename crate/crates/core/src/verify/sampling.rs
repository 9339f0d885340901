//! Pair generation and trajectory-pair evaluation shared by the checkers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::query::SamplePlan;
use crate::domain::DomainSpec;
use crate::error::Result;
use crate::measures::{MeasureSpec, RegionGrid};
use crate::models::SystemModel;
use crate::simulate::integrate_with_stops;

/// Offsets below this are excluded from rate estimates, where integration
/// noise divided by a tiny elapsed time would dominate.
pub(crate) const RATE_MIN_Z: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Pair {
    pub t1: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Ratios `d(t₁ + e)/|a−b|` at elapsed times `e`, sorted by `e`.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    pub pair: Pair,
    /// Initial distance `|a−b|`.
    pub d0: f64,
    pub points: Vec<(f64, f64)>,
}

/// Which elapsed times to evaluate.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Window {
    pub min_elapsed: f64,
    pub max_elapsed: Option<f64>,
    /// Require `e > min_elapsed` rather than `≥`.
    pub exclusive_min: bool,
    /// Also evaluate at every accepted integration step of the first
    /// trajectory, from this elapsed time on.
    pub dense_from: Option<f64>,
}

impl Window {
    fn admits(&self, e: f64) -> bool {
        let lo_ok = if self.exclusive_min { e > self.min_elapsed } else { e >= self.min_elapsed };
        lo_ok && self.max_elapsed.is_none_or(|m| e <= m)
    }
}

fn mix(seed: u64, k: u64) -> u64 {
    seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Coordinates that carry state (not the clock).
fn state_axes(domain: &DomainSpec) -> Vec<usize> {
    (0..domain.dim()).filter(|&i| domain.clock_axis != Some(i)).collect()
}

fn clip(domain: &DomainSpec, margin: f64, x: &mut [f64]) {
    for i in state_axes(domain) {
        let (lo, hi) = domain.axis_range(i, margin);
        x[i] = x[i].clamp(lo, hi);
    }
}

fn width(domain: &DomainSpec, margin: f64, i: usize) -> f64 {
    let (lo, hi) = domain.axis_range(i, margin);
    hi - lo
}

/// Corner pairs, random pairs and close pairs for every start time.
pub(crate) fn base_pairs(model: &SystemModel, plan: &SamplePlan) -> Vec<Pair> {
    let domain = model.domain();
    let margin = plan.boundary_margin;
    let mut out = Vec::new();
    for (k, &t1) in plan.start_times().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(plan.seed, k as u64));
        let corners = domain.corners(margin, t1);
        let max_corner_pairs = 28;
        let mut count = 0;
        'corners: for i in 0..corners.len() {
            for j in i + 1..corners.len() {
                if count == max_corner_pairs {
                    break 'corners;
                }
                out.push(Pair { t1, a: corners[i].clone(), b: corners[j].clone() });
                count += 1;
            }
        }
        for _ in 0..plan.n_pairs {
            let a = domain.sample_initial(&mut rng, margin, t1);
            let b = domain.sample_initial(&mut rng, margin, t1);
            out.push(Pair { t1, a, b });
        }
        for _ in 0..plan.n_pairs.div_ceil(3) {
            let a = domain.sample_initial(&mut rng, margin, t1);
            let mut b = a.clone();
            for i in state_axes(domain) {
                b[i] += 0.02 * width(domain, margin, i) * rng.gen_range(-1.0..=1.0);
            }
            clip(domain, margin, &mut b);
            out.push(Pair { t1, a, b });
        }
    }
    out
}

/// Random perturbations of `center` at radius `0.25 · 2^−round` (relative
/// to the sampling box). Start times move too for time-varying models.
pub(crate) fn refine_pairs(model: &SystemModel, plan: &SamplePlan, center: &Pair, round: usize) -> Vec<Pair> {
    let domain = model.domain();
    let margin = plan.boundary_margin;
    let radius = 0.25 * 0.5f64.powi(round as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(plan.seed ^ 0xA5A5_A5A5, 1000 + round as u64));
    let t_max = plan.horizon.map(|h| h.next_down()).unwrap_or(f64::INFINITY);
    (0..plan.refine_points)
        .map(|_| {
            let t1 = if model.is_time_invariant() {
                center.t1
            } else {
                (center.t1 + radius * center.t1.max(1.0) * rng.gen_range(-1.0..=1.0)).clamp(0.0, t_max)
            };
            let mut a = center.a.clone();
            let mut b = center.b.clone();
            for i in state_axes(domain) {
                let w = width(domain, margin, i);
                a[i] += radius * w * rng.gen_range(-1.0..=1.0);
                b[i] += radius * w * rng.gen_range(-1.0..=1.0);
            }
            clip(domain, margin, &mut a);
            clip(domain, margin, &mut b);
            domain.anchor(&mut a, t1);
            domain.anchor(&mut b, t1);
            Pair { t1, a, b }
        })
        .collect()
}

/// Integrates both members of every pair and records distance ratios.
/// Pairs with coincident states are dropped.
pub(crate) fn trace_pairs(
    model: &SystemModel,
    norm: &MeasureSpec,
    plan: &SamplePlan,
    pairs: Vec<Pair>,
    elapsed: &[f64],
    window: Window,
) -> Result<Vec<Trace>> {
    let cfg = plan.integrator();
    let traced: Vec<Option<Trace>> = pairs
        .into_par_iter()
        .map(|pair| -> Result<Option<Trace>> {
            let d0 = norm.distance(&model.pair_coords(&pair.a), &model.pair_coords(&pair.b))?;
            if d0 == 0.0 {
                return Ok(None);
            }
            let cap = plan.horizon.map(|h| h - pair.t1);
            let mut es: Vec<f64> =
                elapsed.iter().copied().filter(|&e| window.admits(e) && cap.is_none_or(|c| e <= c)).collect();
            es.sort_by(f64::total_cmp);
            es.dedup();
            if es.is_empty() {
                return Ok(Some(Trace { pair, d0, points: Vec::new() }));
            }
            let stops: Vec<f64> = es.iter().map(|e| pair.t1 + e).collect();
            let ta = integrate_with_stops(model, pair.t1, &pair.a, &stops, &cfg)?;
            let tb = integrate_with_stops(model, pair.t1, &pair.b, &stops, &cfg)?;
            let ratio = |s: f64| -> Result<f64> {
                let (xa, xb) = (ta.state_at(s)?, tb.state_at(s)?);
                Ok(norm.distance(&model.pair_coords(&xa), &model.pair_coords(&xb))? / d0)
            };
            let mut points = Vec::with_capacity(es.len());
            for (&e, &s) in es.iter().zip(&stops) {
                points.push((e, ratio(s)?));
            }
            if let Some(from) = window.dense_from {
                let last = *stops.last().expect("nonempty");
                for &s in ta.times() {
                    let e = s - pair.t1;
                    if e >= from && s <= last && window.admits(e) && !stops.contains(&s) {
                        points.push((e, ratio(s)?));
                    }
                }
                points.sort_by(|x, y| x.0.total_cmp(&y.0));
            }
            Ok(Some(Trace { pair, d0, points }))
        })
        .collect::<Result<_>>()?;
    Ok(traced.into_iter().flatten().collect())
}

/// Default region grid for a model's domain: finer for low dimensions.
pub fn default_region_grid(model: &SystemModel) -> RegionGrid {
    let n = model.dim();
    let per_axis = match model.pair_dim() {
        0 | 1 => 201,
        2 => 41,
        3 => 13,
        _ => 5,
    };
    let mut grid = RegionGrid::uniform(n, per_axis);
    if let Some(c) = model.domain().clock_axis {
        grid.counts[c] = 41;
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{augmented_erf_system, linear_decay_system};

    #[test]
    fn pairs_are_deterministic_and_anchored() {
        let m = augmented_erf_system();
        let plan = SamplePlan::default();
        let p1 = base_pairs(&m, &plan);
        let p2 = base_pairs(&m, &plan);
        assert_eq!(p1, p2);
        assert!(p1.iter().all(|p| p.a[1] == p.t1 && p.b[1] == p.t1));
        let r = refine_pairs(&m, &plan, &p1[3], 0);
        assert!(r.iter().all(|p| p.a[1] == p.t1 && p.t1 >= 0.0));
    }

    #[test]
    fn traces_start_at_one() {
        let m = linear_decay_system();
        let plan = SamplePlan::default().with_pairs(2);
        let pairs = base_pairs(&m, &plan);
        let window = Window { min_elapsed: 0.0, max_elapsed: None, exclusive_min: false, dense_from: Some(0.05) };
        let traces = trace_pairs(&m, &MeasureSpec::l1(), &plan, pairs, &[0.0, 1.0, 5.0], window).unwrap();
        for tr in &traces {
            assert_eq!(tr.points[0], (0.0, 1.0));
            for &(e, r) in &tr.points {
                assert!((r - (-e).exp()).abs() < 1e-7, "{e} {r}");
            }
        }
    }
}
