//! Dormand–Prince 5(4) with Hairer's continuous extension.

use crate::error::{Error, Result};
use crate::models::SystemModel;

use super::trajectory::{Segment, Trajectory};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

const A: [&[f64]; 6] = [
    &[0.2],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

/// Difference between the 5th and embedded 4th order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Domain exits up to this size are attributed to roundoff.
pub const EXIT_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Used as both absolute and relative local error tolerance.
    pub tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { tol: 1e-9, max_step: 0.1, max_steps: 20_000_000 }
    }
}

impl IntegratorConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Parameter(format!("integration tolerance must be positive, got {}", self.tol)));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::Parameter(format!("max step must be positive, got {}", self.max_step)));
        }
        Ok(())
    }
}

/// Integrates from `(t1, x1)` to `t_end`.
pub fn integrate(model: &SystemModel, t1: f64, x1: &[f64], t_end: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    integrate_with_stops(model, t1, x1, &[t_end], cfg)
}

/// Integrates from `(t1, x1)` to the largest of `stops`, landing a step
/// exactly on every stop so states there are not interpolated.
pub fn integrate_with_stops(
    model: &SystemModel,
    t1: f64,
    x1: &[f64],
    stops: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = model.dim();
    if x1.len() != n {
        return Err(Error::Dimension { expected: n, got: x1.len() });
    }
    if !t1.is_finite() || x1.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial condition"));
    }
    if let Some(bad) = stops.iter().find(|s| !(s.is_finite() && **s >= t1)) {
        return Err(Error::Parameter(format!("stop time {bad} precedes t1 = {t1}")));
    }
    let mut targets: Vec<f64> = stops.to_vec();
    let t_end = targets.iter().copied().fold(t1, f64::max);
    targets.extend(model.switching_times().iter().copied().filter(|&s| s > t1 && s < t_end));
    targets.retain(|&s| s > t1);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let mut stepper = Stepper::new(model, cfg, n);
    let mut traj = Trajectory::start(model, t1, x1, cfg.tol);
    let mut t = t1;
    let mut y = x1.to_vec();
    traj.note_excursion(t, model.domain().excursion(&y));
    if targets.is_empty() {
        return Ok(traj);
    }

    stepper.eval_start(t, &y);
    let mut h = stepper.initial_step(t, &y, t_end - t);
    let mut steps = 0usize;
    for &target in &targets {
        while t < target {
            steps += 1;
            if steps > cfg.max_steps {
                return Err(Error::NoConvergence { what: "integration", iterations: cfg.max_steps });
            }
            let remaining = target - t;
            if remaining < 1e-12 * t.abs().max(1.0) {
                // Stops a few ulps apart: one Euler step is exact to roundoff.
                let mut y_new = y.clone();
                for (yi, ki) in y_new.iter_mut().zip(&stepper.k[0]) {
                    *yi += remaining * ki;
                }
                let mut cont = vec![0.0; 5 * n];
                for i in 0..n {
                    cont[i] = y[i];
                    cont[n + i] = y_new[i] - y[i];
                }
                traj.push_segment(Segment { t0: t, h: remaining, cont });
                t = target;
                y = y_new;
                traj.push_sample(t, &y);
                traj.note_excursion(t, model.domain().excursion(&y));
                stepper.eval_start(t, &y);
                continue;
            }
            let hit = h * 1.01 >= remaining;
            let h_try = if hit { remaining } else { h };
            if h_try < 1e-12 * t.abs().max(1.0) {
                return Err(Error::Stiffness { t, h: h_try, state: y });
            }
            let t_new = if hit { target } else { t + h_try };
            let err = stepper.attempt(t, t_new, &y, h_try);
            if err <= 1.0 {
                traj.push_segment(stepper.segment(t, h_try, &y));
                std::mem::swap(&mut y, &mut stepper.y_new);
                t = t_new;
                traj.push_sample(t, &y);
                traj.note_excursion(t, model.domain().excursion(&y));
                stepper.accept(t, &y);
                let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
                // A step shortened to land on a stop says little about the next one.
                h = if hit && h_try < h { h } else { h_try * fac }.min(cfg.max_step);
                traj.accepted += 1;
            } else {
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.2 };
                h = h_try * fac;
                traj.rejected += 1;
            }
        }
    }
    Ok(traj)
}

struct Stepper<'a> {
    model: &'a SystemModel,
    tol: f64,
    max_step: f64,
    n: usize,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a SystemModel, cfg: &IntegratorConfig, n: usize) -> Self {
        Self {
            model,
            tol: cfg.tol,
            max_step: cfg.max_step,
            n,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
        }
    }

    /// Evaluation time for the first stage. At a declared switching time the
    /// right-hand limit of the field is the one that governs the step.
    fn stage_one_time(&self, t: f64) -> f64 {
        if self.model.switching_times().contains(&t) {
            t.next_up()
        } else {
            t
        }
    }

    fn eval_start(&mut self, t: f64, y: &[f64]) {
        let ts = self.stage_one_time(t);
        self.model.eval_into(ts, y, &mut self.k[0]);
    }

    fn accept(&mut self, t: f64, y: &[f64]) {
        if self.model.switching_times().contains(&t) {
            self.eval_start(t, y);
        } else {
            self.k.swap(0, 6);
        }
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.tol + self.tol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self, t: f64, y: &[f64], span: f64) -> f64 {
        let n = self.n as f64;
        let rms = |v: &mut dyn Iterator<Item = f64>| (v.map(|x| x * x).sum::<f64>() / n).sqrt();
        let d0 = rms(&mut y.iter().map(|&v| v / self.scale(v, 0.0)));
        let d1 = rms(&mut y.iter().zip(&self.k[0]).map(|(&v, &f)| f / self.scale(v, 0.0)));
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(self.max_step).min(span);
        for i in 0..self.n {
            self.tmp[i] = y[i] + h0 * self.k[0][i];
        }
        let mut f1 = vec![0.0; self.n];
        self.model.eval_into(t + h0, &self.tmp, &mut f1);
        let d2 = rms(&mut (0..self.n).map(|i| (f1[i] - self.k[0][i]) / self.scale(y[i], 0.0))) / h0;
        let big = d1.max(d2);
        let h1 = if big <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / big).powf(0.2) };
        (100.0 * h0).min(h1).min(self.max_step)
    }

    /// One trial step; fills `y_new` and the stages and returns the scaled
    /// error norm (infinite if the trial state is not finite).
    fn attempt(&mut self, t: f64, t_new: f64, y: &[f64], h: f64) -> f64 {
        let n = self.n;
        for s in 1..7 {
            let row = A[s - 1];
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in row.iter().enumerate() {
                    acc += a * self.k[j][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            if s == 6 {
                self.y_new.copy_from_slice(&self.tmp);
            }
            // The last two stages sit exactly on the step end, which may be a switching time.
            let ts = if C[s] == 1.0 { t_new } else { t + C[s] * h };
            self.model.eval_into(ts, &self.tmp, &mut self.k[s]);
        }
        let mut sum = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, w) in E.iter().enumerate() {
                e += w * self.k[j][i];
            }
            let sk = self.scale(y[i], self.y_new[i]);
            let r = h * e / sk;
            sum += r * r;
        }
        let err = (sum / n as f64).sqrt();
        if err.is_finite() && self.y_new.iter().all(|v| v.is_finite()) {
            err
        } else {
            f64::INFINITY
        }
    }

    fn segment(&self, t: f64, h: f64, y: &[f64]) -> Segment {
        let n = self.n;
        let mut cont = vec![0.0; 5 * n];
        for i in 0..n {
            let ydiff = self.y_new[i] - y[i];
            let bspl = h * self.k[0][i] - ydiff;
            cont[i] = y[i];
            cont[n + i] = ydiff;
            cont[2 * n + i] = bspl;
            cont[3 * n + i] = ydiff - h * self.k[6][i] - bspl;
            let mut d = 0.0;
            for (j, w) in D.iter().enumerate() {
                d += w * self.k[j][i];
            }
            cont[4 * n + i] = h * d;
        }
        Segment { t0: t, h, cont }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{counterexample_system, erf_system, linear_decay_system, shifted_system};

    #[test]
    fn erf_matches_closed_form() {
        let m = erf_system();
        let tr = integrate(&m, 0.0, &[0.5], 3.0, &IntegratorConfig::default()).unwrap();
        let exact = m.closed_form(3.0, 0.0, &[0.5]).unwrap()[0];
        assert!((tr.final_state()[0] - exact).abs() < 1e-8);
    }

    #[test]
    fn shifted_across_switch() {
        let m = shifted_system();
        let tr = integrate(&m, 0.0, &[0.9], 2.0, &IntegratorConfig::default()).unwrap();
        assert!((tr.final_state()[0] - (-2.0f64).exp() * 0.9).abs() < 1e-8);
        let flat = integrate(&m, 0.0, &[0.4], 1.0, &IntegratorConfig::default()).unwrap();
        assert!(flat.states().all(|s| s[0] == 0.4));
        let from_switch = integrate(&m, 1.0, &[0.4], 2.0, &IntegratorConfig::default()).unwrap();
        assert!((from_switch.final_state()[0] - (-2.0f64).exp() * 0.4).abs() < 1e-8);
    }

    #[test]
    fn counterexample_long_horizon() {
        let m = counterexample_system();
        let tr = integrate(&m, 1.0, &[0.8], 10.0, &IntegratorConfig::default()).unwrap();
        assert!((tr.final_state()[0] - 0.8 * 2.0 / 11.0).abs() < 1e-8);
    }

    #[test]
    fn stops_are_hit_exactly() {
        let m = linear_decay_system();
        let stops = [0.25, 1.0, 1.0, 3.3];
        let tr = integrate_with_stops(&m, 0.0, &[1.0], &stops, &IntegratorConfig::default()).unwrap();
        for s in stops {
            assert!(tr.times().contains(&s));
            assert!((tr.state_at(s).unwrap()[0] - (-s).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_length_and_bad_input() {
        let m = linear_decay_system();
        let cfg = IntegratorConfig::default();
        let tr = integrate(&m, 2.0, &[0.3], 2.0, &cfg).unwrap();
        assert_eq!(tr.final_state(), &[0.3]);
        assert!(integrate(&m, 2.0, &[0.3], 1.0, &cfg).is_err());
        assert!(integrate(&m, 0.0, &[0.3, 0.1], 1.0, &cfg).is_err());
        assert!(integrate(&m, 0.0, &[f64::NAN], 1.0, &cfg).is_err());
        assert!(integrate(&m, 0.0, &[0.3], 1.0, &IntegratorConfig::with_tol(0.0)).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let domain = crate::domain::DomainSpec::closed_box(vec![0.0], vec![2.0]).unwrap();
        let m = SystemModel::new("blowup", domain, |_, x, out| out[0] = x[0] * x[0], |_, x| {
            crate::matrix::Matrix::from_diag(&[2.0 * x[0]])
        });
        // x(t) = 1 / (1 − t) blows up at t = 1.
        let err = integrate(&m, 0.0, &[1.0], 2.0, &IntegratorConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Stiffness { .. } | Error::NoConvergence { .. }), "{err}");
    }

    #[test]
    fn stops_ulps_apart() {
        let m = erf_system();
        let t = 7.0 * std::f64::consts::PI;
        let stops = [t, t.next_up().next_up(), 2.0 * t];
        let tr = integrate_with_stops(&m, 0.0, &[0.5], &stops, &IntegratorConfig::default()).unwrap();
        let a = tr.state_at(stops[0]).unwrap()[0];
        let b = tr.state_at(stops[1]).unwrap()[0];
        assert!((a - b).abs() < 1e-14);
    }
}
