//! Data-driven scenarios: a model, a default norm and a list of checks with
//! expected outcomes. The built-in registry is compiled from the JSON files
//! under `scenarios/`.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use contrakit::measures::BaseNorm;
use contrakit::models::{bio_contraction_eps, bio_equilibrium, bio_omega_r, bio_weight, BioParams};
use contrakit::simulate::{integrate, IntegratorConfig};
use contrakit::verify::{
    certify_sost_via_nc, check_br, check_entrainment, check_ic, check_property, check_swe, implication_audit,
    lipschitz_estimate, so_via_swe, EntrainPlan, IcConfig, NcConfig, NormFamily, Property, PropertyQuery, SamplePlan,
    Status, Verdict,
};
use contrakit::{DomainSpec, Matrix, MeasureSpec, ModelSpec, SystemModel};

/// Bundled scenario files, in the order `reproduce all` runs them.
pub const BUILTIN: &[(&str, &str)] = &[
    ("example1", include_str!("../scenarios/example1.json")),
    ("example8", include_str!("../scenarios/example8.json")),
    ("example9", include_str!("../scenarios/example9.json")),
    ("eq34-augmented", include_str!("../scenarios/eq34-augmented.json")),
    ("bio-contractive", include_str!("../scenarios/bio-contractive.json")),
    ("bio-boundary", include_str!("../scenarios/bio-boundary.json")),
    ("entrain-linear", include_str!("../scenarios/entrain-linear.json")),
    ("entrain-bio", include_str!("../scenarios/entrain-bio.json")),
];

/// Norm selection in scenario files and on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NormChoice {
    #[default]
    L1,
    L2,
    Linf,
    /// `|D_ε y|₁` with the bio weight for the `ε` that makes the chain
    /// contractive on all of its window.
    BioContraction,
    /// `|D₀ y|₁`, the limit of the bio weights.
    BioLimit,
    Weighted { base: BaseNorm, weight: Matrix },
}

impl NormChoice {
    pub fn resolve(&self, spec: &ModelSpec) -> Result<MeasureSpec> {
        Ok(match self {
            Self::L1 => MeasureSpec::l1(),
            Self::L2 => MeasureSpec::l2(),
            Self::Linf => MeasureSpec::linf(),
            Self::BioContraction => {
                let p = bio_params(spec)?;
                MeasureSpec::weighted(BaseNorm::L1, bio_weight(&p, bio_contraction_eps(&p, 0.0)?)?)?
            }
            Self::BioLimit => MeasureSpec::weighted(BaseNorm::L1, bio_weight(&bio_params(spec)?, 0.0)?)?,
            Self::Weighted { base, weight } => MeasureSpec::weighted(*base, weight.clone())?,
        })
    }
}

fn bio_params(spec: &ModelSpec) -> Result<BioParams> {
    spec.bio_params().ok_or_else(|| anyhow!("bio norms need a bio model, got `{}`", spec.name()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyChoice {
    Fixed(NormChoice),
    BioDiagonal,
}

impl FamilyChoice {
    pub fn resolve(&self, spec: &ModelSpec) -> Result<NormFamily> {
        Ok(match self {
            Self::Fixed(n) => NormFamily::fixed(n.resolve(spec)?),
            Self::BioDiagonal => NormFamily::bio(bio_params(spec)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionChoice {
    /// The bio invariant box `Ω_r`.
    BioOmega(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LipschitzChoice {
    Value(f64),
    /// `"estimate"`: sup of the induced Jacobian norm over the sampling box.
    Keyword(String),
}

/// One step of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    Property {
        property: Property,
        norm: Option<NormChoice>,
        plan: Option<SamplePlan>,
        expect: Option<Status>,
        min_rate: Option<f64>,
    },
    Swe {
        delta: f64,
        norm: Option<NormChoice>,
        lipschitz: Option<LipschitzChoice>,
        expect: Option<Status>,
    },
    SoBridge {
        eps: f64,
        norm: Option<NormChoice>,
        lipschitz: Option<LipschitzChoice>,
        expect: Option<Status>,
    },
    Ic {
        region: Option<RegionChoice>,
        family: Option<FamilyChoice>,
        #[serde(default)]
        config: IcConfig,
        expect: Option<Status>,
    },
    Br {
        delta: f64,
        big_delta: f64,
        expect: Option<Status>,
        min_rate: Option<f64>,
    },
    Nc {
        family: Option<FamilyChoice>,
        #[serde(default)]
        config: NcConfig,
        expect: Option<Status>,
        expect_sost: Option<Status>,
        expect_so: Option<Status>,
    },
    Entrain {
        norm: Option<NormChoice>,
        #[serde(default)]
        plan: EntrainPlan,
        expect: Option<Status>,
    },
    /// Bio equilibrium and convergence of sampled trajectories to it.
    Equilibrium {
        expect: Option<Vec<f64>>,
        tol: f64,
        time: f64,
        convergence_tol: f64,
        samples: usize,
    },
}

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Property { .. } => "property",
            Self::Swe { .. } => "swe",
            Self::SoBridge { .. } => "so_bridge",
            Self::Ic { .. } => "ic",
            Self::Br { .. } => "br",
            Self::Nc { .. } => "nc",
            Self::Entrain { .. } => "entrain",
            Self::Equilibrium { .. } => "equilibrium",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateDefaults {
    pub t1: f64,
    pub x0: Vec<f64>,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub summary: String,
    pub model: Value,
    #[serde(default)]
    pub norm: NormChoice,
    #[serde(default)]
    pub plan: SamplePlan,
    pub simulate: Option<SimulateDefaults>,
    #[serde(default)]
    pub checks: Vec<Check>,
}

impl Scenario {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        // serde_json errors carry line and column.
        let s: Scenario = serde_json::from_str(text).with_context(|| format!("invalid scenario {origin}"))?;
        s.model_spec().with_context(|| format!("invalid model in scenario {origin}"))?;
        Ok(s)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        Ok(ModelSpec::from_value(self.model.clone())?)
    }

    pub fn build(&self) -> Result<(ModelSpec, SystemModel)> {
        let spec = self.model_spec()?;
        let model = spec.build()?;
        Ok((spec, model))
    }
}

/// Looks a scenario up by name or alias.
pub fn builtin(name: &str) -> Result<Scenario> {
    for (file, text) in BUILTIN {
        let s = Scenario::from_json(text, file)?;
        if s.name == name || s.aliases.iter().any(|a| a == name) {
            return Ok(s);
        }
    }
    let names: Vec<&str> = BUILTIN.iter().map(|(n, _)| *n).collect();
    bail!("unknown scenario `{name}` (known: {}, all)", names.join(", "))
}

pub fn all_builtin() -> Result<Vec<Scenario>> {
    BUILTIN.iter().map(|(file, text)| Scenario::from_json(text, file)).collect()
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: &'static str,
    pub met: bool,
    pub expectations: Vec<String>,
    pub verdicts: Vec<Verdict>,
    pub extra: Value,
}

impl CheckRecord {
    fn new(check: &'static str) -> Self {
        Self { check, met: true, expectations: Vec::new(), verdicts: Vec::new(), extra: Value::Null }
    }

    fn expect_status(&mut self, what: &str, expected: Option<Status>, got: Option<Status>) {
        if let Some(e) = expected {
            let ok = got == Some(e);
            self.met &= ok;
            let got = got.map_or("none", Status::name);
            self.expectations.push(format!("{what}: expected {}, got {got}{}", e.name(), if ok { "" } else { " (MISMATCH)" }));
        }
    }

    fn expect_min_rate(&mut self, min: Option<f64>, rate: Option<f64>) {
        if let Some(m) = min {
            let ok = rate.is_some_and(|r| r >= m);
            self.met &= ok;
            self.expectations.push(format!("rate ≥ {m}: got {rate:?}{}", if ok { "" } else { " (MISMATCH)" }));
        }
    }

    fn expect(&mut self, what: String, ok: bool) {
        self.met &= ok;
        self.expectations.push(format!("{what}{}", if ok { "" } else { " (MISMATCH)" }));
    }
}

fn lipschitz(choice: &Option<LipschitzChoice>, model: &SystemModel, norm: &MeasureSpec, plan: &SamplePlan) -> Result<Option<f64>> {
    match choice {
        None => Ok(None),
        Some(LipschitzChoice::Value(l)) => Ok(Some(*l)),
        Some(LipschitzChoice::Keyword(k)) if k == "estimate" => Ok(Some(lipschitz_estimate(model, norm, plan)?.sup_measure)),
        Some(LipschitzChoice::Keyword(k)) => bail!("lipschitz must be a number or \"estimate\", got \"{k}\""),
    }
}

fn region(choice: &Option<RegionChoice>, spec: &ModelSpec) -> Result<Option<DomainSpec>> {
    match choice {
        None => Ok(None),
        Some(RegionChoice::BioOmega(r)) => Ok(Some(bio_omega_r(&bio_params(spec)?, *r)?)),
    }
}

pub fn run_check(sc: &Scenario, spec: &ModelSpec, model: &SystemModel, check: &Check) -> Result<CheckRecord> {
    let mut rec = CheckRecord::new(check.name());
    let default_norm = |n: &Option<NormChoice>| n.as_ref().unwrap_or(&sc.norm).resolve(spec);
    match check {
        Check::Property { property, norm, plan, expect, min_rate } => {
            let q = PropertyQuery::new(property.clone(), default_norm(norm)?)
                .with_plan(plan.clone().unwrap_or_else(|| sc.plan.clone()));
            let v = check_property(model, &q)?;
            rec.expect_status("status", *expect, Some(v.status));
            rec.expect_min_rate(*min_rate, v.rate);
            rec.verdicts.push(v);
        }
        Check::Swe { delta, norm, lipschitz: l, expect } => {
            let norm = default_norm(norm)?;
            let l = lipschitz(l, model, &norm, &sc.plan)?;
            let v = check_swe(model, *delta, &norm, &sc.plan, l)?;
            rec.expect_status("status", *expect, Some(v.status));
            rec.verdicts.push(v);
        }
        Check::SoBridge { eps, norm, lipschitz: l, expect } => {
            let norm = default_norm(norm)?;
            let l = lipschitz(l, model, &norm, &sc.plan)?;
            let b = so_via_swe(model, *eps, &norm, &sc.plan, l)?;
            rec.expect_status("so", *expect, b.so.as_ref().map(|v| v.status));
            rec.verdicts.push(b.swe);
            rec.verdicts.extend(b.delayed);
            rec.verdicts.extend(b.so);
        }
        Check::Ic { region: r, family, config, expect } => {
            let fam = family.clone().unwrap_or(FamilyChoice::Fixed(sc.norm.clone())).resolve(spec)?;
            let v = check_ic(model, region(r, spec)?.as_ref(), &fam, config)?;
            rec.expect_status("status", *expect, Some(v.status));
            rec.verdicts.push(v);
        }
        Check::Br { delta, big_delta, expect, min_rate } => {
            let v = check_br(model, *delta, *big_delta, None, &[])?;
            rec.expect_status("status", *expect, Some(v.status));
            rec.expect_min_rate(*min_rate, v.rate);
            rec.verdicts.push(v);
        }
        Check::Nc { family, config, expect, expect_sost, expect_so } => {
            let fam = family.clone().unwrap_or(FamilyChoice::Fixed(sc.norm.clone())).resolve(spec)?;
            let out = certify_sost_via_nc(model, &fam, &sc.plan, config)?;
            rec.expect_status("nc", *expect, Some(out.nc.status));
            let sost = if out.sost_certified() { Status::Certified } else { Status::Falsified };
            rec.expect_status("sost", *expect_sost, Some(sost));
            let so = if out.so_certified() { Status::Certified } else { Status::Falsified };
            rec.expect_status("so", *expect_so, Some(so));
            rec.verdicts.push(out.nc);
            rec.verdicts.extend(out.sost);
            if let Some(b) = out.so {
                rec.verdicts.push(b.swe);
                rec.verdicts.extend(b.delayed);
                rec.verdicts.extend(b.so);
            }
        }
        Check::Entrain { norm, plan, expect } => {
            let v = check_entrainment(model, &default_norm(norm)?, plan)?;
            rec.expect_status("status", *expect, Some(v.status));
            rec.verdicts.push(v);
        }
        Check::Equilibrium { expect, tol, time, convergence_tol, samples } => {
            let p = bio_params(spec)?;
            let e = bio_equilibrium(&p)?;
            if let Some(want) = expect {
                let err = e.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                rec.expect(format!("equilibrium within {tol} of {want:?}: error {err:e}"), err <= *tol);
            }
            let region = model.domain();
            let mut starts = region.corners(0.0, 0.0);
            starts.extend(region.grid(&vec![*samples; model.dim()], 0.0)?);
            let cfg = IntegratorConfig::with_tol(1e-10);
            let mut worst: f64 = 0.0;
            for x in &starts {
                let tr = integrate(model, 0.0, x, *time, &cfg)?;
                let d = tr.final_state().iter().zip(&e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                worst = worst.max(d);
            }
            rec.expect(
                format!("{} trajectories within {convergence_tol} of the equilibrium at t = {time}: max {worst:e}", starts.len()),
                worst <= *convergence_tol,
            );
            rec.extra = json!({ "equilibrium": e, "starts": starts.len(), "max_distance": worst });
        }
    }
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub summary: String,
    pub model: Value,
    pub met: bool,
    pub checks: Vec<CheckRecord>,
}

pub fn run_scenario(sc: &Scenario) -> Result<ScenarioReport> {
    let (spec, model) = sc.build()?;
    let checks = sc
        .checks
        .iter()
        .enumerate()
        .map(|(i, c)| run_check(sc, &spec, &model, c).with_context(|| format!("scenario {}, check #{} ({})", sc.name, i + 1, c.name())))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioReport {
        name: sc.name.clone(),
        summary: sc.summary.clone(),
        model: sc.model.clone(),
        met: checks.iter().all(|c| c.met),
        checks,
    })
}

/// A reproduce bundle: scenario reports plus an implication audit over all
/// verdicts they produced.
pub fn bundle(reports: &[ScenarioReport]) -> (Value, bool) {
    let verdicts: Vec<Verdict> = reports.iter().flat_map(|r| r.checks.iter().flat_map(|c| c.verdicts.clone())).collect();
    let audit = implication_audit(&verdicts);
    let ok = audit.is_consistent() && reports.iter().all(|r| r.met);
    let scenarios: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "name": r.name,
                "summary": r.summary,
                "model": r.model,
                "expectations_met": r.met,
                "checks": r.checks.iter().map(|c| json!({
                    "check": c.check,
                    "expectations_met": c.met,
                    "expectations": c.expectations,
                    "verdicts": c.verdicts.iter().map(Verdict::to_value).collect::<Vec<_>>(),
                    "extra": c.extra,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let value = json!({
        "schema": "contrakit.bundle/1",
        "scenarios": scenarios,
        "audit": audit,
        "consistent": audit.is_consistent(),
        "expectations_met": reports.iter().all(|r| r.met),
    });
    (value, ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_parses() {
        let all = all_builtin().unwrap();
        assert_eq!(all.len(), BUILTIN.len());
        for (s, (file, _)) in all.iter().zip(BUILTIN) {
            assert_eq!(&s.name, file);
            s.build().unwrap();
        }
        assert_eq!(builtin("shifted").unwrap().name, "example9");
        assert!(builtin("nope").unwrap_err().to_string().contains("known"));
    }

    #[test]
    fn unknown_check_fields_rejected() {
        let text = r#"{"name":"x","summary":"","model":{"model":"erf"},"checks":[{"check":"br","delta":0,"big_delta":1,"bogus":1}]}"#;
        let err = Scenario::from_json(text, "inline").unwrap_err();
        assert!(format!("{err:#}").contains("bogus"), "{err:#}");
    }
}
