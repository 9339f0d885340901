use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::format::to_json_string;
use crate::measures::MeasureSpec;

/// Version tag written into every serialized verdict.
pub const VERDICT_SCHEMA: &str = "contrakit.verdict/1";

/// A property to check. A rate of `None` asks for an estimate; a given rate
/// is checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Property {
    /// `d(t₂) ≤ exp(−c(t₂−t₁))|a−b|`.
    Contraction { c: Option<f64> },
    /// `d(t₂+τ) ≤ exp(−ℓ(t₂−t₁))|a−b|`.
    St { tau: f64, ell: Option<f64> },
    /// `d(t₂) ≤ (1+ε) exp(−ℓ(t₂−t₁))|a−b|`.
    So { eps: f64, ell: Option<f64> },
    /// `d(t₂+τ) ≤ (1+ε) exp(−ℓ(t₂−t₁))|a−b|`.
    Sost { tau: f64, eps: f64, ell: Option<f64> },
    /// SOST with the overshoot tied to the shift: `ε = τ`.
    SostShiftOvershoot { tau: f64, ell: Option<f64> },
    /// `d(t) ≤ (1+ε) exp(−ℓ(t−t₁))|a−b|` for `t ≥ t₁+τ`.
    SostDelayed { tau: f64, eps: f64, ell: Option<f64> },
    /// `d(s₂) ≤ |a−b|` for `s₂ > s₁`.
    Ne,
    /// `d(s₂) < |a−b|` for `s₂ > s₁`.
    Wc,
    /// `d(t) ≤ (1+δ)|a−b|` on `[t₀, t₀+τ₀]`.
    Swe { delta: f64 },
    Ic,
    Br { delta: f64, big_delta: f64 },
    Nc,
    Entrain,
}

/// Property families, used by the implication audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyKind {
    Contraction,
    St,
    So,
    Sost,
    Ne,
    Wc,
    Swe,
    Ic,
    Br,
    Nc,
    Entrain,
}

impl PropertyKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Contraction => "contraction",
            Self::St => "st",
            Self::So => "so",
            Self::Sost => "sost",
            Self::Ne => "ne",
            Self::Wc => "wc",
            Self::Swe => "swe",
            Self::Ic => "ic",
            Self::Br => "br",
            Self::Nc => "nc",
            Self::Entrain => "entrain",
        }
    }
}

impl Property {
    pub fn kind(&self) -> PropertyKind {
        match self {
            Self::Contraction { .. } => PropertyKind::Contraction,
            Self::St { .. } => PropertyKind::St,
            Self::So { .. } => PropertyKind::So,
            Self::Sost { .. } | Self::SostShiftOvershoot { .. } | Self::SostDelayed { .. } => PropertyKind::Sost,
            Self::Ne => PropertyKind::Ne,
            Self::Wc => PropertyKind::Wc,
            Self::Swe { .. } => PropertyKind::Swe,
            Self::Ic => PropertyKind::Ic,
            Self::Br { .. } => PropertyKind::Br,
            Self::Nc => PropertyKind::Nc,
            Self::Entrain => PropertyKind::Entrain,
        }
    }

    /// The rate under test, if any.
    pub fn rate(&self) -> Option<f64> {
        match *self {
            Self::Contraction { c } => c,
            Self::St { ell, .. }
            | Self::So { ell, .. }
            | Self::Sost { ell, .. }
            | Self::SostShiftOvershoot { ell, .. }
            | Self::SostDelayed { ell, .. } => ell,
            _ => None,
        }
    }

    /// Same property with the rate replaced.
    pub fn with_rate(&self, rate: Option<f64>) -> Self {
        let mut p = self.clone();
        match &mut p {
            Self::Contraction { c } => *c = rate,
            Self::St { ell, .. }
            | Self::So { ell, .. }
            | Self::Sost { ell, .. }
            | Self::SostShiftOvershoot { ell, .. }
            | Self::SostDelayed { ell, .. } => *ell = rate,
            _ => {}
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Query(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let rate = |name: &str, v: Option<f64>| v.map_or(Ok(()), |v| positive(name, v));
        match *self {
            Self::Contraction { c } => rate("c", c),
            Self::St { tau, ell } | Self::SostShiftOvershoot { tau, ell } => {
                positive("tau", tau)?;
                rate("ell", ell)
            }
            Self::So { eps, ell } => {
                positive("eps", eps)?;
                rate("ell", ell)
            }
            Self::Sost { tau, eps, ell } | Self::SostDelayed { tau, eps, ell } => {
                positive("tau", tau)?;
                positive("eps", eps)?;
                rate("ell", ell)
            }
            Self::Swe { delta } => positive("delta", delta),
            Self::Br { delta, big_delta } => {
                if !(delta >= 0.0 && delta.is_finite()) {
                    return Err(Error::Query(format!("delta must be nonnegative, got {delta}")));
                }
                positive("big_delta", big_delta)
            }
            Self::Ne | Self::Wc | Self::Ic | Self::Nc | Self::Entrain => Ok(()),
        }
    }

    /// Parameters as a JSON object (without the kind tag).
    pub fn params(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("property serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("kind");
            obj.retain(|_, val| !val.is_null());
        }
        v
    }
}

/// The sampling plan that stands in for the universal quantifiers over
/// `t₂ ≥ t₁ ≥ 0` and `a, b ∈ Ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplePlan {
    pub seed: u64,
    /// Random pairs per start time (corner pairs and close pairs come on top).
    pub n_pairs: usize,
    pub t1_grid: Vec<f64>,
    /// Offsets `t₂ − t₁`.
    pub t2_offsets: Vec<f64>,
    pub boundary_margin: f64,
    pub refine_rounds: usize,
    pub refine_points: usize,
    /// Evaluation times are capped at this absolute time when set.
    pub horizon: Option<f64>,
    /// Integration tolerance; the verdict slack is 100 times this.
    pub tol: f64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            n_pairs: 12,
            t1_grid: vec![0.0, 0.5, 1.0, 2.0, 5.0],
            t2_offsets: vec![0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 300.0, 1000.0],
            boundary_margin: crate::domain::DEFAULT_OPEN_MARGIN,
            refine_rounds: 2,
            refine_points: 8,
            horizon: None,
            tol: 1e-9,
        }
    }
}

impl SamplePlan {
    pub fn slack(&self) -> f64 {
        100.0 * self.tol
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_offsets(mut self, offsets: Vec<f64>) -> Self {
        self.t2_offsets = offsets;
        self
    }

    pub fn with_t1_grid(mut self, grid: Vec<f64>) -> Self {
        self.t1_grid = grid;
        self
    }

    pub fn with_pairs(mut self, n_pairs: usize) -> Self {
        self.n_pairs = n_pairs;
        self
    }

    pub fn without_refinement(mut self) -> Self {
        self.refine_rounds = 0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.t1_grid.is_empty() || self.t2_offsets.is_empty() {
            return Err(Error::Query("sample plan grids must be nonempty".into()));
        }
        if let Some(t) = self.t1_grid.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::Query(format!("start times must be finite and ≥ 0, got {t}")));
        }
        if let Some(z) = self.t2_offsets.iter().find(|z| !(z.is_finite() && **z >= 0.0)) {
            return Err(Error::Query(format!("offsets must be finite and ≥ 0, got {z}")));
        }
        if !(self.tol > 0.0 && self.tol < 1e-3) {
            return Err(Error::Query(format!("tolerance must lie in (0, 1e-3), got {}", self.tol)));
        }
        if !(self.boundary_margin >= 0.0) {
            return Err(Error::Query(format!("boundary margin must be ≥ 0, got {}", self.boundary_margin)));
        }
        if let Some(h) = self.horizon {
            if !self.t1_grid.iter().any(|&t| t < h) {
                return Err(Error::Query(format!("no start time lies before the horizon {h}")));
            }
        }
        Ok(())
    }

    pub(crate) fn integrator(&self) -> crate::simulate::IntegratorConfig {
        crate::simulate::IntegratorConfig::with_tol(self.tol)
    }

    /// Start times that leave room before the horizon.
    pub(crate) fn start_times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> =
            self.t1_grid.iter().copied().filter(|&t| self.horizon.is_none_or(|h| t < h)).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyQuery {
    pub property: Property,
    pub norm: MeasureSpec,
    #[serde(default)]
    pub plan: SamplePlan,
}

impl PropertyQuery {
    pub fn new(property: Property, norm: MeasureSpec) -> Self {
        Self { property, norm, plan: SamplePlan::default() }
    }

    pub fn with_plan(mut self, plan: SamplePlan) -> Self {
        self.plan = plan;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Certified,
    Falsified,
}

impl Status {
    pub fn is_certified(self) -> bool {
        self == Self::Certified
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Certified => "CERTIFIED",
            Self::Falsified => "FALSIFIED",
        }
    }
}

/// How a falsification was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// A sampled pair violates the inequality.
    Trajectory,
    /// No positive rate fits all samples.
    RateEstimate,
    /// The empirical rate keeps shrinking as the horizon grows.
    RateDrift,
    /// An eigenvalue of the Jacobian rules out the rate in every norm.
    Linearization,
    /// A region bound on the matrix measure is not negative.
    MeasureBound,
    /// A trajectory reaches or stays at the boundary.
    Boundary,
    /// A component velocity is not bounded below near its zero facet.
    Slab,
    /// Trajectories fail to converge to a common periodic orbit.
    Orbit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub kind: WitnessKind,
    pub t1: f64,
    pub t2: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub margin: f64,
}

/// A sampled evaluation of a property inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t1: f64,
    pub t2: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `d/|a−b|` at the evaluation time.
    pub ratio: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub model: String,
    pub property: Property,
    pub norm: String,
    pub status: Status,
    /// The certified or estimated rate (`c`, `ℓ`, `K`, …), when meaningful.
    pub rate: Option<f64>,
    pub witness: Option<Witness>,
    /// Worst-margin (check) or lowest-rate (estimate) sample.
    pub binding: Option<Sample>,
    pub samples: usize,
    pub worst_margin: f64,
    pub slack: f64,
    pub plan: Option<SamplePlan>,
    pub notes: Vec<String>,
    /// Property-specific evidence (region bounds, `τ₀`, orbits, …).
    pub details: Map<String, Value>,
}

impl Verdict {
    pub(crate) fn new(model: &str, property: Property, norm: String, slack: f64) -> Self {
        Self {
            model: model.to_string(),
            property,
            norm,
            status: Status::Certified,
            rate: None,
            witness: None,
            binding: None,
            samples: 0,
            worst_margin: f64::NEG_INFINITY,
            slack,
            plan: None,
            notes: Vec::new(),
            details: Map::new(),
        }
    }

    pub fn is_certified(&self) -> bool {
        self.status.is_certified()
    }

    pub fn kind(&self) -> PropertyKind {
        self.property.kind()
    }

    pub(crate) fn falsify(&mut self, witness: Witness) {
        self.status = Status::Falsified;
        if self.witness.is_none() {
            self.witness = Some(witness);
        }
    }

    pub(crate) fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details.insert(key.to_string(), serde_json::to_value(value).expect("detail serializes"));
    }

    pub fn to_value(&self) -> Value {
        let finite = |x: f64| if x.is_finite() { json!(x) } else { Value::Null };
        json!({
            "schema": VERDICT_SCHEMA,
            "model": self.model,
            "property": self.property.kind().name(),
            "params": self.property.params(),
            "norm": self.norm,
            "status": self.status.name(),
            "rate": self.rate.map(finite),
            "witness": self.witness,
            "binding": self.binding,
            "samples": self.samples,
            "worst_margin": finite(self.worst_margin),
            "slack": self.slack,
            "plan": self.plan,
            "notes": self.notes,
            "details": self.details,
        })
    }

    pub fn to_json(&self) -> String {
        to_json_string(&self.to_value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn property_json_roundtrip() {
        let p: Property = serde_json::from_str(r#"{"kind": "sost", "tau": 1.0, "eps": 1.0, "ell": 0.1}"#).unwrap();
        assert_eq!(p, Property::Sost { tau: 1.0, eps: 1.0, ell: Some(0.1) });
        assert_eq!(p.kind(), PropertyKind::Sost);
        assert_eq!(p.params(), json!({"tau": 1.0, "eps": 1.0, "ell": 0.1}));
        let est: Property = serde_json::from_str(r#"{"kind": "st", "tau": 0.5, "ell": null}"#).unwrap();
        assert_eq!(est.rate(), None);
    }

    #[test]
    fn validation() {
        assert!(Property::St { tau: 0.0, ell: None }.validate().is_err());
        assert!(Property::So { eps: 1.0, ell: Some(-1.0) }.validate().is_err());
        assert!(Property::Br { delta: 0.1, big_delta: 0.05 }.validate().is_ok());
        assert!(SamplePlan::default().validate().is_ok());
        assert!(SamplePlan { t1_grid: vec![], ..Default::default() }.validate().is_err());
        assert!(SamplePlan::default().with_horizon(0.0).validate().is_err());
    }

    #[test]
    fn horizon_filters_start_times() {
        let plan = SamplePlan::default().with_horizon(1.0);
        assert_eq!(plan.start_times(), vec![0.0, 0.5]);
    }
}
