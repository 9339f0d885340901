//! The system-model abstraction and the concrete example systems.

mod bio;
mod spec;
mod zoo;

use std::fmt;
use std::sync::Arc;

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use bio::{
    bio_circuit, bio_contraction_eps, bio_equilibrium, bio_mu_closed_form, bio_omega_r, bio_weight,
    periodic_bio_circuit, BioParams, PeriodicForcing,
};
pub use spec::ModelSpec;
pub use zoo::{
    augmented_erf_system, counterexample_system, erf_g, erf_system, forced_linear_system, linear_decay_system,
    logistic_system, relaxation_system, shifted_system, SineForcing,
};

pub type FieldFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
pub type JacobianFn = dyn Fn(f64, &[f64]) -> Matrix + Send + Sync;
/// `(t, t₁, a) ↦ x(t, t₁, a)`.
pub type ClosedFormFn = dyn Fn(f64, f64, &[f64]) -> Vec<f64> + Send + Sync;

/// A time-varying vector field `ẋ = f(t, x)` with its Jacobian and the
/// metadata the simulator and checkers rely on. Immutable once built and
/// cheap to clone.
#[derive(Clone)]
pub struct SystemModel {
    name: String,
    dim: usize,
    field: Arc<FieldFn>,
    jacobian: Arc<JacobianFn>,
    domain: DomainSpec,
    period: Option<f64>,
    closed_form: Option<Arc<ClosedFormFn>>,
    lipschitz_bound: Option<f64>,
    switching_times: Vec<f64>,
    time_invariant: bool,
    remarks: Vec<String>,
}

impl SystemModel {
    pub fn new<F, J>(name: impl Into<String>, domain: DomainSpec, field: F, jacobian: J) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        J: Fn(f64, &[f64]) -> Matrix + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            dim: domain.dim(),
            field: Arc::new(field),
            jacobian: Arc::new(jacobian),
            domain,
            period: None,
            closed_form: None,
            lipschitz_bound: None,
            switching_times: Vec::new(),
            time_invariant: false,
            remarks: Vec::new(),
        }
    }

    pub fn with_period(mut self, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Parameter(format!("period must be positive, got {period}")));
        }
        self.period = Some(period);
        Ok(self)
    }

    pub fn with_closed_form<C>(mut self, closed_form: C) -> Self
    where
        C: Fn(f64, f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.closed_form = Some(Arc::new(closed_form));
        self
    }

    pub fn with_lipschitz_bound(mut self, l: f64) -> Self {
        self.lipschitz_bound = Some(l);
        self
    }

    /// Times where `f` is discontinuous in `t`; the integrator restarts there.
    pub fn with_switching_times(mut self, mut times: Vec<f64>) -> Self {
        times.sort_by(f64::total_cmp);
        times.dedup();
        self.switching_times = times;
        self
    }

    pub fn time_invariant(mut self, yes: bool) -> Self {
        self.time_invariant = yes;
        self
    }

    pub fn with_domain(mut self, domain: DomainSpec) -> Result<Self> {
        if domain.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: domain.dim() });
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn with_remark(mut self, remark: impl Into<String>) -> Self {
        self.remarks.push(remark.into());
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.lipschitz_bound
    }

    pub fn switching_times(&self) -> &[f64] {
        &self.switching_times
    }

    pub fn is_time_invariant(&self) -> bool {
        self.time_invariant
    }

    pub fn has_closed_form(&self) -> bool {
        self.closed_form.is_some()
    }

    pub fn remarks(&self) -> &[String] {
        &self.remarks
    }

    #[inline]
    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.field)(t, x, out)
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, x, &mut out);
        out
    }

    pub fn jacobian(&self, t: f64, x: &[f64]) -> Matrix {
        (self.jacobian)(t, x)
    }

    /// Jacobian governing the difference of two trajectories started at the
    /// same time: clock coordinates never separate, so their rows and columns
    /// are dropped.
    pub fn pair_jacobian(&self, t: f64, x: &[f64]) -> Matrix {
        let j = self.jacobian(t, x);
        match self.domain.clock_axis {
            None => j,
            Some(c) => {
                let keep: Vec<usize> = (0..self.dim).filter(|&i| i != c).collect();
                let data: Vec<f64> =
                    keep.iter().flat_map(|&r| keep.iter().map(move |&k| (r, k))).map(|(r, k)| j[(r, k)]).collect();
                Matrix::from_row_slice(keep.len(), &data).expect("reduced Jacobian is square")
            }
        }
    }

    /// Dimension of [`pair_jacobian`](Self::pair_jacobian).
    pub fn pair_dim(&self) -> usize {
        self.dim - usize::from(self.domain.clock_axis.is_some())
    }

    /// Projects a state onto the coordinates used for pair distances.
    pub fn pair_coords(&self, x: &[f64]) -> Vec<f64> {
        match self.domain.clock_axis {
            None => x.to_vec(),
            Some(c) => x.iter().enumerate().filter(|&(i, _)| i != c).map(|(_, v)| *v).collect(),
        }
    }

    pub fn closed_form(&self, t: f64, t1: f64, a: &[f64]) -> Option<Vec<f64>> {
        self.closed_form.as_ref().map(|c| c(t, t1, a))
    }
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("period", &self.period)
            .field("closed_form", &self.closed_form.is_some())
            .field("lipschitz_bound", &self.lipschitz_bound)
            .field("switching_times", &self.switching_times)
            .field("time_invariant", &self.time_invariant)
            .finish()
    }
}
