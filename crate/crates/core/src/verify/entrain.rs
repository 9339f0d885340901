//! Convergence to a common periodic orbit under periodic forcing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::query::{Property, Verdict, Witness, WitnessKind};
use crate::domain::linspace;
use crate::error::{Error, Result};
use crate::measures::MeasureSpec;
use crate::models::SystemModel;
use crate::simulate::{integrate_with_stops, IntegratorConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntrainPlan {
    /// Number of starts (corners first, then seeded random points).
    pub starts: usize,
    /// Certification is attempted after this many periods first ...
    pub min_periods: usize,
    /// ... and at every later period up to this one.
    pub max_periods: usize,
    pub tol: f64,
    pub seed: u64,
    /// Samples of the returned orbit over one period.
    pub orbit_samples: usize,
    pub integrator_tol: f64,
}

impl Default for EntrainPlan {
    fn default() -> Self {
        Self { starts: 5, min_periods: 1, max_periods: 60, tol: 1e-6, seed: 20_240_601, orbit_samples: 65, integrator_tol: 1e-10 }
    }
}

/// Integrates `starts` trajectories over whole periods and certifies at the
/// first `N` where all states at `N·T` agree to `tol` and the period map
/// moves the first one by less than `tol`. The orbit through the first
/// trajectory on `[N·T, (N+1)·T]` is returned in `details.orbit`.
pub fn check_entrainment(model: &SystemModel, norm: &MeasureSpec, plan: &EntrainPlan) -> Result<Verdict> {
    let period = model
        .period()
        .ok_or_else(|| Error::Query(format!("model `{}` declares no forcing period", model.name())))?;
    if plan.starts < 1 || plan.min_periods < 1 || plan.max_periods < plan.min_periods || !(plan.tol > 0.0) {
        return Err(Error::Query("entrainment plan needs starts ≥ 1, 1 ≤ min_periods ≤ max_periods and tol > 0".into()));
    }
    let domain = model.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut starts: Vec<Vec<f64>> = domain.corners(1e-3, 0.0).into_iter().take(plan.starts).collect();
    while starts.len() < plan.starts {
        starts.push(domain.sample_initial(&mut rng, 1e-3, 0.0));
    }
    let cfg = IntegratorConfig::with_tol(plan.integrator_tol);
    let last = plan.max_periods + 1;
    let mut stops: Vec<f64> = (1..=last).map(|k| k as f64 * period).collect();
    stops.extend(linspace(0.0, last as f64 * period, 8 * last + 1));
    let trajs = starts
        .par_iter()
        .map(|x| integrate_with_stops(model, 0.0, x, &stops, &cfg))
        .collect::<Result<Vec<_>>>()?;
    let pc = |x: &[f64]| model.pair_coords(x);

    let mut v = Verdict::new(model.name(), Property::Entrain, norm.label(), plan.tol);
    v.samples = starts.len();
    let mut worst = (f64::INFINITY, 0, 0.0);
    for n in plan.min_periods..=plan.max_periods {
        let t = n as f64 * period;
        let states = trajs.iter().map(|tr| tr.state_at(t)).collect::<Result<Vec<_>>>()?;
        let mut spread: f64 = 0.0;
        for i in 0..states.len() {
            for j in i + 1..states.len() {
                spread = spread.max(norm.distance(&pc(&states[i]), &pc(&states[j]))?);
            }
        }
        let next = trajs[0].state_at(t + period)?;
        let residual = norm.distance(&pc(&states[0]), &pc(&next))?;
        let m = spread.max(residual);
        if m < worst.0 {
            worst = (m, n, residual);
        }
        if spread < plan.tol && residual < plan.tol {
            let times = linspace(t, t + period, plan.orbit_samples.max(2));
            let orbit = times
                .iter()
                .map(|&s| trajs[0].state_at(s).map(|x| (s - t, x)))
                .collect::<Result<Vec<_>>>()?;
            v.rate = Some(n as f64);
            v.worst_margin = m - plan.tol;
            v.detail("periods", n);
            v.detail("spread", spread);
            v.detail("residual", residual);
            v.detail("period", period);
            v.detail("orbit_start", t);
            v.detail("orbit", orbit);
            return Ok(v);
        }
    }
    let (m, n, residual) = worst;
    v.worst_margin = m - plan.tol;
    v.detail("residual", residual);
    v.notes.push(format!("no period up to {} brings all starts within {}", plan.max_periods, plan.tol));
    v.falsify(Witness {
        kind: WitnessKind::Orbit,
        t1: 0.0,
        t2: n as f64 * period,
        a: starts[0].clone(),
        b: starts.last().expect("nonempty").clone(),
        margin: m - plan.tol,
    });
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{forced_linear_system, linear_decay_system, SineForcing};

    #[test]
    fn sine_forcing_orbit() {
        let f = SineForcing { offset: 0.0, amplitude: 1.0, omega: 1.0 };
        let m = forced_linear_system(f).unwrap();
        let v = check_entrainment(&m, &MeasureSpec::l1(), &EntrainPlan::default()).unwrap();
        assert!(v.is_certified());
        let t0 = v.details["orbit_start"].as_f64().unwrap();
        for p in v.details["orbit"].as_array().unwrap() {
            let s = p[0].as_f64().unwrap() + t0;
            let x = p[1][0].as_f64().unwrap();
            assert!((x - (s.sin() - s.cos()) / 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_forcing_gives_equilibrium() {
        let m = forced_linear_system(SineForcing { offset: 0.3, amplitude: 0.0, omega: 1.0 }).unwrap();
        let v = check_entrainment(&m, &MeasureSpec::l1(), &EntrainPlan::default()).unwrap();
        assert!(v.is_certified());
        for p in v.details["orbit"].as_array().unwrap() {
            assert!((p[1][0].as_f64().unwrap() - 0.3).abs() < 1e-6);
        }
        assert!(matches!(check_entrainment(&linear_decay_system(), &MeasureSpec::l1(), &EntrainPlan::default()), Err(Error::Query(_))));
    }
}
