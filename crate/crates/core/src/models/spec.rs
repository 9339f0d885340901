use serde::{Deserialize, Serialize};

use super::{bio, zoo, SystemModel};
use crate::error::{Error, Result};

/// JSON description of a model, tagged by `"model"`:
///
/// ```json
/// {"model": "bio", "n": 2, "alphas": [1.0, 1.0], "k": 2.0}
/// {"model": "periodic_bio", "n": 2, "alphas": [1.0, 1.0], "k": 2.0, "amplitude": 0.5, "period": 1.0}
/// {"model": "forced_linear", "offset": 0.0, "amplitude": 1.0, "omega": 1.0}
/// {"model": "erf"}
/// ```
///
/// Parameter-free models: `erf`, `counterexample`, `shifted`, `linear_decay`,
/// `logistic`, `relaxation`, `augmented_erf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Erf,
    Counterexample,
    Shifted,
    LinearDecay,
    Logistic,
    Relaxation,
    AugmentedErf,
    ForcedLinear {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        omega: f64,
    },
    Bio {
        n: usize,
        alphas: Vec<f64>,
        k: f64,
    },
    PeriodicBio {
        n: usize,
        alphas: Vec<f64>,
        k: f64,
        amplitude: f64,
        period: f64,
    },
}

const KNOWN: &str = "erf, counterexample, shifted, linear_decay, logistic, relaxation, augmented_erf, \
                     forced_linear, bio, periodic_bio";

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Spec(format!("model spec is not valid JSON: {e}")))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        match value.get("model") {
            None => return Err(Error::Spec(format!("model spec needs a \"model\" field (one of: {KNOWN})"))),
            Some(serde_json::Value::String(_)) => {}
            Some(other) => return Err(Error::Spec(format!("\"model\" must be a string, got {other}"))),
        }
        let keys: Vec<String> = value.as_object().map(|o| o.keys().cloned().collect()).unwrap_or_default();
        let spec: Self = serde_json::from_value(value).map_err(|e| {
            let msg = e.to_string();
            if msg.starts_with("unknown variant") {
                Error::Spec(format!("{msg}; known models: {KNOWN}"))
            } else {
                Error::Spec(msg)
            }
        })?;
        // Parameter-free variants accept any extra key unless checked here.
        let canonical = serde_json::to_value(&spec).expect("spec serializes");
        if let Some(extra) = keys.iter().find(|k| canonical.get(k.as_str()).is_none()) {
            return Err(Error::Spec(format!("unknown field `{extra}` for model \"{}\"", spec.name())));
        }
        spec.build()?;
        Ok(spec)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Erf => "erf",
            Self::Counterexample => "counterexample",
            Self::Shifted => "shifted",
            Self::LinearDecay => "linear_decay",
            Self::Logistic => "logistic",
            Self::Relaxation => "relaxation",
            Self::AugmentedErf => "augmented_erf",
            Self::ForcedLinear { .. } => "forced_linear",
            Self::Bio { .. } => "bio",
            Self::PeriodicBio { .. } => "periodic_bio",
        }
    }

    /// Circuit parameters for the bio variants.
    pub fn bio_params(&self) -> Option<bio::BioParams> {
        match self {
            Self::Bio { n, alphas, k } | Self::PeriodicBio { n, alphas, k, .. } => {
                Some(bio::BioParams { n: *n, alphas: alphas.clone(), k: *k })
            }
            _ => None,
        }
    }

    pub fn build(&self) -> Result<SystemModel> {
        let bad = |e: Error| Error::Spec(format!("{} model: {e}", self.name()));
        Ok(match self {
            Self::Erf => zoo::erf_system(),
            Self::Counterexample => zoo::counterexample_system(),
            Self::Shifted => zoo::shifted_system(),
            Self::LinearDecay => zoo::linear_decay_system(),
            Self::Logistic => zoo::logistic_system(),
            Self::Relaxation => zoo::relaxation_system(),
            Self::AugmentedErf => zoo::augmented_erf_system(),
            Self::ForcedLinear { offset, amplitude, omega } => {
                zoo::forced_linear_system(zoo::SineForcing { offset: *offset, amplitude: *amplitude, omega: *omega })
                    .map_err(bad)?
            }
            Self::Bio { .. } => bio::bio_circuit(self.bio_params().expect("bio variant")).map_err(bad)?,
            Self::PeriodicBio { amplitude, period, .. } => bio::periodic_bio_circuit(
                self.bio_params().expect("bio variant"),
                bio::PeriodicForcing { amplitude: *amplitude, period: *period },
            )
            .map_err(bad)?,
        })
    }
}
