//! Sampled certification and falsification of contraction-type properties,
//! the sufficient-condition pipelines behind them, and an audit of verdict
//! sets against the implications between the notions.

mod audit;
mod br;
mod entrain;
mod ic;
mod nc;
mod norms;
mod property;
mod query;
mod rates;
mod sampling;
mod swe;

pub use audit::{consequences, implication_audit, AuditReport, Inconsistency, IMPLICATIONS};
pub use br::{check_br, SlabMin, BR_THRESHOLD};
pub use entrain::{check_entrainment, EntrainPlan};
pub use ic::{check_ic, IcConfig};
pub use nc::{certify_sost_via_nc, NcConfig, NcOutcome};
pub use norms::NormFamily;
pub use property::{check_property, linearization_rate, reproduce_witness};
pub use query::{
    Property, PropertyKind, PropertyQuery, Sample, SamplePlan, Status, Verdict, Witness, WitnessKind, VERDICT_SCHEMA,
};
pub use rates::{transform_rates, RateTransform, RateTriple};
pub use sampling::default_region_grid;
pub use swe::{check_swe, lipschitz_estimate, so_via_swe, SoBridge};
