//! Consistency of a set of verdicts with the implication graph between the
//! contraction notions.

use std::collections::BTreeSet;

use serde::Serialize;

use super::query::{PropertyKind, Verdict};

use PropertyKind::*;

/// Direct implications. `SWE ∧ SOST ⇒ SO` is handled separately.
pub const IMPLICATIONS: &[(PropertyKind, PropertyKind)] = &[
    (Contraction, St),
    (Contraction, So),
    (Contraction, Sost),
    (So, Sost),
    (St, Sost),
    (St, Wc),
    (St, Ne),
    (So, Ne),
    (Sost, Ne),
    (Wc, Ne),
    (Ic, St),
    (Nc, Sost),
];

/// Transitive closure of [`IMPLICATIONS`] from `p`, excluding `p`.
pub fn consequences(p: PropertyKind) -> BTreeSet<PropertyKind> {
    let mut out = BTreeSet::new();
    let mut stack = vec![p];
    while let Some(q) = stack.pop() {
        for &(a, b) in IMPLICATIONS {
            if a == q && out.insert(b) {
                stack.push(b);
            }
        }
    }
    out.remove(&p);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inconsistency {
    pub model: String,
    pub norm: String,
    pub certified: Vec<String>,
    pub falsified: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub verdicts: usize,
    pub groups: usize,
    pub inconsistencies: Vec<Inconsistency>,
}

impl AuditReport {
    pub fn is_consistent(&self) -> bool {
        self.inconsistencies.is_empty()
    }
}

fn label(v: &Verdict) -> String {
    format!("{} {}", v.kind().name(), v.property.params())
}

/// Flags every falsified verdict that some certified verdict for the same
/// model and norm implies. Verdicts are compared by property family only, so
/// parameters do not have to match.
pub fn implication_audit(verdicts: &[Verdict]) -> AuditReport {
    let mut keys: Vec<(&str, &str)> = verdicts.iter().map(|v| (v.model.as_str(), v.norm.as_str())).collect();
    keys.sort();
    keys.dedup();
    let mut inconsistencies = Vec::new();
    for &(model, norm) in &keys {
        let group: Vec<&Verdict> = verdicts.iter().filter(|v| v.model == model && v.norm == norm).collect();
        let certified: Vec<&Verdict> = group.iter().copied().filter(|v| v.is_certified()).collect();
        let has = |k: PropertyKind| certified.iter().any(|v| v.kind() == k);
        for f in group.iter().filter(|v| !v.is_certified()) {
            let mut culprits: Vec<String> = certified
                .iter()
                .filter(|c| consequences(c.kind()).contains(&f.kind()))
                .map(|c| label(c))
                .collect();
            let mut reason = "implied by a certified property".to_string();
            if culprits.is_empty() && f.kind() == So && has(Swe) && (has(Sost) || has(St) || has(Nc)) {
                culprits = certified
                    .iter()
                    .filter(|c| matches!(c.kind(), Swe | Sost | St | Nc))
                    .map(|c| label(c))
                    .collect();
                reason = "SWE together with SOST implies SO".into();
            }
            if !culprits.is_empty() {
                inconsistencies.push(Inconsistency {
                    model: model.to_string(),
                    norm: norm.to_string(),
                    certified: culprits,
                    falsified: label(f),
                    reason,
                });
            }
        }
    }
    AuditReport { verdicts: verdicts.len(), groups: keys.len(), inconsistencies }
}
