use std::fmt::Write;

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::format::fmt_g17;
use crate::models::SystemModel;

use super::integrator::EXIT_SLACK;

/// One accepted step with its interpolation coefficients (`5·n` values).
#[derive(Debug, Clone)]
pub(crate) struct Segment {
    pub t0: f64,
    pub h: f64,
    pub cont: Vec<f64>,
}

impl Segment {
    fn eval(&self, t: f64, n: usize, out: &mut [f64]) {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let c = &self.cont;
        for i in 0..n {
            out[i] = c[i] + th * (c[n + i] + th1 * (c[2 * n + i] + th * (c[3 * n + i] + th1 * c[4 * n + i])));
        }
    }
}

/// A computed solution `x(t, t₁, x₁)` on `[t₁, t_end]`: the accepted step
/// endpoints plus a dense-output interpolant between them.
#[derive(Debug, Clone)]
pub struct Trajectory {
    model: String,
    n: usize,
    t1: f64,
    times: Vec<f64>,
    states: Vec<f64>,
    segments: Vec<Segment>,
    tol: f64,
    max_excursion: f64,
    excursion_time: f64,
    pub(crate) accepted: usize,
    pub(crate) rejected: usize,
}

impl Trajectory {
    pub(crate) fn start(model: &SystemModel, t1: f64, x1: &[f64], tol: f64) -> Self {
        Self {
            model: model.name().to_string(),
            n: model.dim(),
            t1,
            times: vec![t1],
            states: x1.to_vec(),
            segments: Vec::new(),
            tol,
            max_excursion: 0.0,
            excursion_time: t1,
            accepted: 0,
            rejected: 0,
        }
    }

    pub(crate) fn push_segment(&mut self, seg: Segment) {
        self.segments.push(seg);
    }

    pub(crate) fn push_sample(&mut self, t: f64, x: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(x);
    }

    pub(crate) fn note_excursion(&mut self, t: f64, e: f64) {
        if e > self.max_excursion {
            self.max_excursion = e;
            self.excursion_time = t;
        }
    }

    pub fn model_name(&self) -> &str {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn x1(&self) -> &[f64] {
        &self.states[..self.n]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn steps(&self) -> (usize, usize) {
        (self.accepted, self.rejected)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.n..(i + 1) * self.n]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.n)
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.times.len() - 1)
    }

    /// Largest outward excursion from the model domain at step endpoints.
    pub fn max_excursion(&self) -> f64 {
        self.max_excursion
    }

    pub fn excursion_time(&self) -> f64 {
        self.excursion_time
    }

    /// True if the solution left the model domain by more than the roundoff
    /// slack. Recorded, never fatal.
    pub fn left_domain(&self) -> bool {
        self.max_excursion > EXIT_SLACK
    }

    /// State at `t ∈ [t₁, t_end]`: the stored value at step endpoints, the
    /// dense-output interpolant elsewhere.
    pub fn state_at(&self, t: f64) -> Result<Vec<f64>> {
        if !(t >= self.t1 && t <= self.t_end()) {
            return Err(Error::Parameter(format!(
                "time {t} outside computed interval [{}, {}]",
                self.t1,
                self.t_end()
            )));
        }
        if let Ok(i) = self.times.binary_search_by(|s| s.total_cmp(&t)) {
            return Ok(self.state(i).to_vec());
        }
        let k = self.segments.partition_point(|s| s.t0 <= t) - 1;
        let mut out = vec![0.0; self.n];
        self.segments[k].eval(t, self.n, &mut out);
        Ok(out)
    }

    /// Largest excursion from `region` over step endpoints and step midpoints.
    pub fn max_excursion_from(&self, region: &DomainSpec) -> (f64, f64) {
        let mut worst = (0.0, self.t1);
        for (i, x) in self.states().enumerate() {
            let e = region.excursion(x);
            if e > worst.0 {
                worst = (e, self.times[i]);
            }
        }
        let mut mid = vec![0.0; self.n];
        for s in &self.segments {
            let tm = s.t0 + 0.5 * s.h;
            s.eval(tm, self.n, &mut mid);
            let e = region.excursion(&mid);
            if e > worst.0 {
                worst = (e, tm);
            }
        }
        worst
    }

    /// CSV with header `t,x1,…,xn` and one row per step endpoint.
    pub fn to_csv(&self) -> String {
        let rows: Vec<(f64, &[f64])> = self.times.iter().copied().zip(self.states()).collect();
        csv_rows(self.n, rows)
    }

    /// CSV resampled at the given times.
    pub fn to_csv_at(&self, times: &[f64]) -> Result<String> {
        let states = times.iter().map(|&t| self.state_at(t)).collect::<Result<Vec<_>>>()?;
        Ok(csv_rows(self.n, times.iter().copied().zip(states.iter().map(Vec::as_slice))))
    }
}

/// Renders rows as `t,x1,…,xn` CSV with 17-significant-digit floats.
pub fn csv_rows<'a>(n: usize, rows: impl IntoIterator<Item = (f64, &'a [f64])>) -> String {
    let mut out = String::from("t");
    for i in 1..=n {
        let _ = write!(out, ",x{i}");
    }
    out.push('\n');
    for (t, x) in rows {
        out.push_str(&fmt_g17(t));
        for v in x {
            out.push(',');
            out.push_str(&fmt_g17(*v));
        }
        out.push('\n');
    }
    out
}
