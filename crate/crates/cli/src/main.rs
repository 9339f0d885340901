use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use contrakit::verify::Property;
use contrakit::BaseNorm;
use contrakit_cli::scenario::NormChoice;
use contrakit_cli::{cmd_check, cmd_measure, cmd_reproduce, cmd_simulate, init_threads, OutputFormat, RunConfig, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "contrakit", version, about = "Matrix measures, simulation and contraction checks for time-varying ODEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print matrix measures of a CSV matrix.
    Measure {
        /// Matrix CSV file.
        #[arg(long = "in", value_name = "CSV")]
        input: PathBuf,
        /// Base norm; repeat for several. Defaults to all three.
        #[arg(long, value_enum)]
        norm: Vec<NormArg>,
        /// Invertible weight P; the measure is taken of P A P⁻¹.
        #[arg(long, value_name = "CSV")]
        weight: Option<PathBuf>,
    },
    /// Integrate a model and print the trajectory.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        t1: Option<f64>,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long)]
        t_end: Option<f64>,
        /// Resample at this many equally spaced times instead of step endpoints.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        /// Compare against the model's closed form; exit 1 on mismatch.
        #[arg(long)]
        verify_closed_form: bool,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Check one property; exit 0 if certified, 1 if falsified.
    Check {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        query: QueryArgs,
    },
    /// Run a bundled scenario (or `all`) and write the report bundle.
    Reproduce {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Source {
    /// JSON run configuration; flags override its fields.
    #[arg(long, value_name = "JSON")]
    config: Option<PathBuf>,
    /// Bundled scenario name or alias.
    #[arg(long)]
    scenario: Option<String>,
    /// Scenario JSON file.
    #[arg(long, value_name = "JSON")]
    scenario_file: Option<PathBuf>,
    /// Inline model spec JSON.
    #[arg(long, value_name = "JSON")]
    model: Option<String>,
    #[arg(long, value_name = "JSON")]
    model_file: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long, value_enum)]
    property: Option<PropertyArg>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Rate to check; omit to estimate one.
    #[arg(long)]
    ell: Option<f64>,
    /// Contraction rate to check; omit to estimate one.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    big_delta: Option<f64>,
    #[arg(long, value_enum)]
    norm: Option<ChoiceArg>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    L1,
    L2,
    Linf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChoiceArg {
    L1,
    L2,
    Linf,
    BioContraction,
    BioLimit,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum PropertyArg {
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

fn need(v: Option<f64>, flag: &str, p: &str) -> Result<f64> {
    v.with_context(|| format!("property `{p}` needs --{flag}"))
}

impl QueryArgs {
    fn property(&self) -> Result<Option<Property>> {
        let Some(p) = self.property else { return Ok(None) };
        Ok(Some(match p {
            PropertyArg::Contraction => Property::Contraction { c: self.c },
            PropertyArg::St => Property::St { tau: need(self.tau, "tau", "st")?, ell: self.ell },
            PropertyArg::So => Property::So { eps: need(self.eps, "eps", "so")?, ell: self.ell },
            PropertyArg::Sost => {
                Property::Sost { tau: need(self.tau, "tau", "sost")?, eps: need(self.eps, "eps", "sost")?, ell: self.ell }
            }
            PropertyArg::Ne => Property::Ne,
            PropertyArg::Wc => Property::Wc,
            PropertyArg::Swe => Property::Swe { delta: need(self.delta, "delta", "swe")? },
            PropertyArg::Ic => Property::Ic,
            PropertyArg::Br => {
                Property::Br { delta: need(self.delta, "delta", "br")?, big_delta: need(self.big_delta, "big-delta", "br")? }
            }
            PropertyArg::Nc => Property::Nc,
            PropertyArg::Entrain => Property::Entrain,
        }))
    }
}

impl Source {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if self.scenario.is_some() || self.scenario_file.is_some() {
            cfg.scenario = self.scenario.clone();
            cfg.scenario_file = self.scenario_file.clone();
        }
        if let Some(m) = &self.model {
            cfg.model = Some(serde_json::from_str(m).context("--model is not valid JSON")?);
            cfg.model_file = None;
        }
        if let Some(p) = &self.model_file {
            cfg.model_file = Some(p.clone());
            cfg.model = None;
        }
        cfg.seed = self.seed.or(cfg.seed);
        cfg.out = self.out.clone().or(cfg.out);
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<i32> {
    init_threads()?;
    match cli.command {
        Command::Measure { input, norm, weight } => {
            let norms: Vec<BaseNorm> = norm
                .iter()
                .map(|n| match n {
                    NormArg::L1 => BaseNorm::L1,
                    NormArg::L2 => BaseNorm::L2,
                    NormArg::Linf => BaseNorm::Linf,
                })
                .collect();
            print!("{}", cmd_measure(&input, &norms, weight.as_deref())?);
            Ok(0)
        }
        Command::Simulate { source, t1, x0, t_end, samples, tol, verify_closed_form, format } => {
            let mut cfg = source.config()?;
            let s = &mut cfg.simulate;
            s.t1 = t1.or(s.t1);
            s.x0 = x0.or(s.x0.take());
            s.t_end = t_end.or(s.t_end);
            s.samples = samples.or(s.samples);
            s.tol = tol.or(s.tol);
            if let Some(f) = format {
                cfg.format = Some(match f {
                    FormatArg::Csv => OutputFormat::Csv,
                    FormatArg::Json => OutputFormat::Json,
                });
            }
            let out = cmd_simulate(&cfg, verify_closed_form)?;
            for n in &out.notes {
                eprintln!("{n}");
            }
            Ok(out.code)
        }
        Command::Check { source, query } => {
            let mut cfg = source.config()?;
            if cfg.format == Some(OutputFormat::Csv) {
                bail!("check writes JSON only");
            }
            if let Some(p) = query.property()? {
                cfg.property = Some(p);
            }
            if let Some(n) = query.norm {
                cfg.norm = Some(match n {
                    ChoiceArg::L1 => NormChoice::L1,
                    ChoiceArg::L2 => NormChoice::L2,
                    ChoiceArg::Linf => NormChoice::Linf,
                    ChoiceArg::BioContraction => NormChoice::BioContraction,
                    ChoiceArg::BioLimit => NormChoice::BioLimit,
                });
            }
            if query.pairs.is_some() || query.horizon.is_some() {
                let mut plan = match &cfg.plan {
                    Some(p) => p.clone(),
                    None => cfg.scenario()?.map(|s| s.plan).unwrap_or_default(),
                };
                if let Some(n) = query.pairs {
                    plan.n_pairs = n;
                }
                if query.horizon.is_some() {
                    plan.horizon = query.horizon;
                }
                cfg.plan = Some(plan);
            }
            let (_, code) = cmd_check(&cfg)?;
            Ok(code)
        }
        Command::Reproduce { name, out } => {
            let (_, lines, code) = cmd_reproduce(&name, out.as_deref())?;
            for l in lines {
                eprintln!("{l}");
            }
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
