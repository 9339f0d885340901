//! Adaptive integration, trajectory-pair divergence and invariance checks.

mod integrator;
mod trajectory;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{DomainSpec, DEFAULT_OPEN_MARGIN};
use crate::error::{Error, Result};
use crate::measures::MeasureSpec;
use crate::models::SystemModel;

pub use integrator::{integrate, integrate_with_stops, IntegratorConfig, EXIT_SLACK};
pub use trajectory::{csv_rows, Trajectory};

/// `|x(t, t₁, a) − x(t, t₁, b)|` sampled at `times`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceSeries {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub t1: f64,
    pub norm: String,
    pub initial_distance: f64,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
}

pub fn pair_divergence(
    model: &SystemModel,
    t1: f64,
    a: &[f64],
    b: &[f64],
    times: &[f64],
    norm: &MeasureSpec,
    cfg: &IntegratorConfig,
) -> Result<DivergenceSeries> {
    if let Some(bad) = times.iter().find(|&&t| !(t >= t1)) {
        return Err(Error::Parameter(format!("sample time {bad} precedes t1 = {t1}")));
    }
    let ta = integrate_with_stops(model, t1, a, times, cfg)?;
    let tb = integrate_with_stops(model, t1, b, times, cfg)?;
    let dist = |x: &[f64], y: &[f64]| norm.distance(&model.pair_coords(x), &model.pair_coords(y));
    let distances = times
        .iter()
        .map(|&t| dist(&ta.state_at(t)?, &tb.state_at(t)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(DivergenceSeries {
        a: a.to_vec(),
        b: b.to_vec(),
        t1,
        norm: norm.label(),
        initial_distance: dist(a, b)?,
        times: times.to_vec(),
        distances,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub region: DomainSpec,
    pub samples: usize,
    pub t1: f64,
    pub horizon: f64,
    pub max_excursion: f64,
    pub worst_start: Vec<f64>,
    pub worst_time: f64,
}

impl InvarianceReport {
    pub fn holds(&self) -> bool {
        self.max_excursion <= EXIT_SLACK
    }
}

/// Integrates from the corners of `region` and `n_samples` seeded random
/// interior starts over `[t1, t1 + horizon]` and reports the largest outward
/// excursion from `region`.
pub fn invariance_check(
    model: &SystemModel,
    region: &DomainSpec,
    n_samples: usize,
    t1: f64,
    horizon: f64,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<InvarianceReport> {
    if region.dim() != model.dim() {
        return Err(Error::Dimension { expected: model.dim(), got: region.dim() });
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::Parameter(format!("horizon must be nonnegative, got {horizon}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = region.corners(DEFAULT_OPEN_MARGIN, t1);
    starts.extend((0..n_samples).map(|_| region.sample_initial(&mut rng, DEFAULT_OPEN_MARGIN, t1)));
    let results = starts
        .par_iter()
        .map(|x| integrate(model, t1, x, t1 + horizon, cfg).map(|tr| tr.max_excursion_from(region)))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = (0.0, t1, 0usize);
    for (i, &(e, t)) in results.iter().enumerate() {
        if e > worst.0 {
            worst = (e, t, i);
        }
    }
    Ok(InvarianceReport {
        region: region.clone(),
        samples: starts.len(),
        t1,
        horizon,
        max_excursion: worst.0,
        worst_start: starts[worst.2].clone(),
        worst_time: worst.1,
    })
}
