//! Library half of the `contrakit` command: matrix CSV input, run
//! configuration and the four subcommands. `main.rs` only parses arguments.

pub mod scenario;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use contrakit::format::{fmt_g17, to_json_string};
use contrakit::models::{bio_equilibrium, SystemModel};
use contrakit::simulate::{csv_rows, integrate, IntegratorConfig};
use contrakit::verify::{
    certify_sost_via_nc, check_br, check_entrainment, check_ic, check_property, check_swe, EntrainPlan, IcConfig,
    NcConfig, NormFamily, Property, PropertyQuery, SamplePlan, Status, Verdict,
};
use contrakit::{BaseNorm, Matrix, MeasureSpec, ModelSpec};

use scenario::{NormChoice, Scenario};

/// Exit codes shared by every subcommand.
pub const EXIT_CERTIFIED: i32 = 0;
pub const EXIT_FALSIFIED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Parses a square matrix from CSV. Blank lines and lines starting with `#`
/// are skipped; cells may be separated by commas and padded with spaces.
pub fn parse_matrix_csv(text: &str, origin: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(col, cell)| {
                let cell = cell.trim();
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| anyhow!("{origin}: row {}, column {}: `{cell}` is not a finite number", lineno + 1, col + 1))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                bail!("{origin}: row {}: expected {} columns, found {}", lineno + 1, first.len(), row.len());
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{origin}: no matrix rows");
    }
    if rows.len() != rows[0].len() {
        bail!("{origin}: matrix must be square, got {} rows and {} columns", rows.len(), rows[0].len());
    }
    Ok(Matrix::from_rows(&rows)?)
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_matrix_csv(&text, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Simulation parameters of a [`RunConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateParams {
    pub t1: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub t_end: Option<f64>,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
}

/// Everything a `simulate` or `check` run needs, as a JSON file. Command-line
/// flags override the fields they name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub scenario_file: Option<PathBuf>,
    pub model: Option<Value>,
    pub model_file: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub simulate: SimulateParams,
    pub property: Option<Property>,
    pub norm: Option<NormChoice>,
    pub plan: Option<SamplePlan>,
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).with_context(|| format!("invalid run configuration {origin}"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// The scenario named or loaded by this configuration, if any.
    pub fn scenario(&self) -> Result<Option<Scenario>> {
        match (&self.scenario, &self.scenario_file) {
            (Some(_), Some(_)) => bail!("give either a scenario name or a scenario file, not both"),
            (Some(name), None) => Ok(Some(scenario::builtin(name)?)),
            (None, Some(path)) => {
                let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
                Ok(Some(Scenario::from_json(&text, &path.display().to_string())?))
            }
            (None, None) => Ok(None),
        }
    }

    /// Resolves the model: an explicit model wins over the scenario's.
    pub fn model(&self, scenario: Option<&Scenario>) -> Result<(ModelSpec, SystemModel)> {
        let spec = match (&self.model, &self.model_file) {
            (Some(_), Some(_)) => bail!("give either an inline model or a model file, not both"),
            (Some(v), None) => ModelSpec::from_value(v.clone())?,
            (None, Some(path)) => {
                let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
                ModelSpec::from_json(&text).with_context(|| format!("in {}", path.display()))?
            }
            (None, None) => match scenario {
                Some(s) => s.model_spec()?,
                None => bail!("no model: pass --scenario, --model or --model-file"),
            },
        };
        let model = spec.build()?;
        Ok((spec, model))
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// `measure`: prints each requested measure of the matrix. With a single norm
/// only the value is printed.
pub fn cmd_measure(input: &Path, norms: &[BaseNorm], weight: Option<&Path>) -> Result<String> {
    let a = read_matrix_csv(input)?;
    let weight = weight.map(read_matrix_csv).transpose()?;
    let norms = if norms.is_empty() { vec![BaseNorm::L1, BaseNorm::L2, BaseNorm::Linf] } else { norms.to_vec() };
    let mut lines = Vec::new();
    for &base in &norms {
        let spec = match &weight {
            Some(p) => MeasureSpec::weighted(base, p.clone())?,
            None => MeasureSpec::plain(base),
        };
        let mu = spec.mu(&a)?;
        lines.push(if norms.len() == 1 { fmt_g17(mu) } else { format!("{} {}", spec.label(), fmt_g17(mu)) });
    }
    Ok(lines.join("\n") + "\n")
}

/// Result of `simulate`: the rendered output plus notes for stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutput {
    pub text: String,
    pub notes: Vec<String>,
    pub code: i32,
}

/// Largest closed-form error accepted by `--verify-closed-form`.
pub const CLOSED_FORM_TOL: f64 = 1e-7;

pub fn cmd_simulate(cfg: &RunConfig, verify_closed_form: bool) -> Result<SimulateOutput> {
    let sc = cfg.scenario()?;
    let (spec, model) = cfg.model(sc.as_ref())?;
    let defaults = sc.as_ref().and_then(|s| s.simulate.clone());
    let p = &cfg.simulate;
    let t1 = p.t1.or(defaults.as_ref().map(|d| d.t1)).unwrap_or(0.0);
    let x0 = p
        .x0
        .clone()
        .or(defaults.as_ref().map(|d| d.x0.clone()))
        .ok_or_else(|| anyhow!("no initial state: pass --x0"))?;
    let t_end = p.t_end.or(defaults.as_ref().map(|d| d.t_end)).ok_or_else(|| anyhow!("no horizon: pass --t-end"))?;
    let tol = p.tol.unwrap_or(1e-10);
    let traj = integrate(&model, t1, &x0, t_end, &IntegratorConfig::with_tol(tol))?;

    let (times, states): (Vec<f64>, Vec<Vec<f64>>) = match p.samples {
        Some(0) => bail!("--samples must be at least 1"),
        Some(n) if t_end > t1 => {
            let ts = contrakit::domain::linspace(t1, t_end, n.max(2));
            let xs = ts.iter().map(|&t| traj.state_at(t)).collect::<contrakit::Result<Vec<_>>>()?;
            (ts, xs)
        }
        _ => (traj.times().to_vec(), traj.states().map(<[f64]>::to_vec).collect()),
    };

    let mut notes = Vec::new();
    let mut code = EXIT_CERTIFIED;
    if verify_closed_form {
        if !model.has_closed_form() {
            bail!("model `{}` has no closed form to verify against", model.name());
        }
        let mut worst: f64 = 0.0;
        for (t, x) in times.iter().zip(&states) {
            let exact = model.closed_form(*t, t1, &x0).expect("closed form present");
            worst = exact.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
        }
        let ok = worst <= CLOSED_FORM_TOL;
        notes.push(format!(
            "closed form: max error {} over {} points ({})",
            fmt_g17(worst),
            times.len(),
            if ok { "ok" } else { "MISMATCH" }
        ));
        if !ok {
            code = EXIT_FALSIFIED;
        }
    }
    if let Some(bp) = spec.bio_params() {
        let e = bio_equilibrium(&bp)?;
        let last = states.last().expect("at least one row");
        let d = last.iter().zip(&e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let e_txt: Vec<String> = e.iter().map(|v| fmt_g17(*v)).collect();
        notes.push(format!("equilibrium: [{}], final distance {}", e_txt.join(", "), fmt_g17(d)));
    }

    let text = match cfg.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => csv_rows(model.dim(), times.iter().copied().zip(states.iter().map(Vec::as_slice))),
        OutputFormat::Json => to_json_string(&json!({
            "model": spec,
            "t1": t1,
            "x0": x0,
            "tol": tol,
            "t": times,
            "x": states,
        })),
    };
    emit(cfg.out.as_deref(), &text)?;
    Ok(SimulateOutput { text, notes, code })
}

/// Runs the property of `cfg` and returns its verdict.
pub fn run_query(cfg: &RunConfig) -> Result<Verdict> {
    let sc = cfg.scenario()?;
    let (spec, model) = cfg.model(sc.as_ref())?;
    let property = cfg.property.clone().ok_or_else(|| anyhow!("no property: pass --property"))?;
    let norm_choice = cfg.norm.clone().or_else(|| sc.as_ref().map(|s| s.norm.clone())).unwrap_or_default();
    let norm = norm_choice.resolve(&spec)?;
    let mut plan = cfg.plan.clone().or_else(|| sc.as_ref().map(|s| s.plan.clone())).unwrap_or_default();
    if let Some(seed) = cfg.seed {
        plan.seed = seed;
    }
    let v = match &property {
        Property::Swe { delta } => check_swe(&model, *delta, &norm, &plan, None)?,
        Property::Br { delta, big_delta } => check_br(&model, *delta, *big_delta, None, &[])?,
        Property::Ic => check_ic(&model, None, &NormFamily::fixed(norm), &IcConfig::default())?,
        Property::Nc => {
            let family = match norm_choice {
                NormChoice::BioLimit | NormChoice::BioContraction if spec.bio_params().is_some() => {
                    NormFamily::bio(spec.bio_params().expect("checked"))
                }
                _ => NormFamily::fixed(norm),
            };
            let out = certify_sost_via_nc(&model, &family, &plan, &NcConfig::default())?;
            let mut v = out.nc.clone();
            if let Some(s) = &out.sost {
                v.details.insert("sost".into(), s.to_value());
            }
            v
        }
        Property::Entrain => {
            let mut ep = EntrainPlan::default();
            if let Some(seed) = cfg.seed {
                ep.seed = seed;
            }
            check_entrainment(&model, &norm, &ep)?
        }
        _ => check_property(&model, &PropertyQuery::new(property, norm).with_plan(plan))?,
    };
    Ok(v)
}

/// `check`: verdict JSON and the exit code for its status.
pub fn cmd_check(cfg: &RunConfig) -> Result<(String, i32)> {
    let v = run_query(cfg)?;
    let text = to_json_string(&v.to_value());
    emit(cfg.out.as_deref(), &text)?;
    let code = if v.status == Status::Certified { EXIT_CERTIFIED } else { EXIT_FALSIFIED };
    Ok((text, code))
}

/// `reproduce`: runs one scenario or `all` and writes the bundle. Returns the
/// bundle text, one summary line per scenario and the exit code.
pub fn cmd_reproduce(name: &str, out: Option<&Path>) -> Result<(String, Vec<String>, i32)> {
    let scenarios = if name == "all" { scenario::all_builtin()? } else { vec![scenario::builtin(name)?] };
    let reports = scenarios.par_iter().map(scenario::run_scenario).collect::<Result<Vec<_>>>()?;
    let (bundle, ok) = scenario::bundle(&reports);
    let mut lines: Vec<String> = reports
        .iter()
        .map(|r| format!("{:<16} {}", r.name, if r.met { "expectations met" } else { "EXPECTATIONS NOT MET" }))
        .collect();
    let n = bundle["audit"]["inconsistencies"].as_array().map_or(0, Vec::len);
    lines.push(format!("audit: {n} inconsistencies"));
    let text = to_json_string(&bundle);
    emit(out, &text)?;
    Ok((text, lines, if ok { EXIT_CERTIFIED } else { EXIT_FALSIFIED }))
}

/// Sizes the global rayon pool from `CONTRAKIT_THREADS` when set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("CONTRAKIT_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("CONTRAKIT_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            bail!("CONTRAKIT_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_errors_carry_position() {
        let err = parse_matrix_csv("1,2\n3,x\n", "A.csv").unwrap_err().to_string();
        assert!(err.contains("row 2, column 2"), "{err}");
        let err = parse_matrix_csv("1,2\n3\n", "A.csv").unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
        assert!(parse_matrix_csv("1,2\n3,4\n5,6\n", "A.csv").is_err());
        let m = parse_matrix_csv("# comment\n -1, 0\n\n0 ,-1\n", "A.csv").unwrap();
        assert_eq!(m, Matrix::identity(2).scale(-1.0));
    }

    #[test]
    fn run_config_rejects_unknown_fields_with_location() {
        let err = RunConfig::from_json("{\n  \"scenario\": \"example1\",\n  \"sed\": 3\n}", "cfg.json").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("sed") && msg.contains("line 3"), "{msg}");
    }
}
