use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use subrad_core::constants::{compute_constants, SolverConfig};
use subrad_core::perturbations::{declared_modulus, lip_estimate, perturbation_fn, perturbed_model};
use subrad_core::problem::ProblemSpec;
use subrad_core::radii::radius_report;
use subrad_core::system::{subreg_ratio, ConstraintSystem};
use subrad_core::verify;
use subrad_core::{NormSpec, SubradError};

mod bundled;
mod example;
mod output;
mod reports;

use example::ExampleName;
use output::{emit, Format};
use reports::PerturbCheckReport;

#[derive(Debug)]
pub enum CliError {
    /// Property check failed (exit 1).
    Failure(String),
    /// Bad input file or arguments (exit 2).
    Input(String),
    /// Reference point outside the constraint set (exit 3).
    Infeasible(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }
}

impl From<SubradError> for CliError {
    fn from(e: SubradError) -> Self {
        match e {
            SubradError::Infeasible(_) => CliError::Infeasible(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Failure(m) | CliError::Input(m) | CliError::Infeasible(m) => f.write_str(m),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "subrad", version, about = "Bounds on the radius of metric subregularity for polyhedral constraint systems")]
struct Cli {
    /// Output format (JSON by default; `example` prints a text table unless a format is given).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SUBRAD_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Problem file (JSON).
    spec: PathBuf,
    /// Override the norm of the problem file.
    #[arg(long)]
    p: Option<NormSpec>,
    /// Override the sphere grid resolution.
    #[arg(long)]
    resolution: Option<usize>,
    /// Override the solver seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    Frobenius,
    EckartYoung,
    Zigzag,
    Chain,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Regularity constants of a problem.
    Constants(SolveArgs),
    /// Radius bounds with their provenance.
    Radii(SolveArgs),
    /// Run a self-check suite; exits with 1 and the first counterexample on failure.
    Verify {
        suite: Suite,
        /// Number of trials (random systems per norm for `chain`, levels for `zigzag`).
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Worked example with expected and computed values.
    Example {
        name: ExampleName,
        #[arg(long, default_value = "2")]
        p: NormSpec,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample the subregularity ratio of a problem with and without its perturbation.
    PerturbCheck {
        spec: PathBuf,
        #[arg(long)]
        p: Option<NormSpec>,
        /// Largest sampling radius; three further decades are sampled below it.
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        #[arg(long, default_value_t = 4000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

pub fn load_spec(path: &Path) -> Result<ProblemSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_spec(&text)
}

pub fn parse_spec(text: &str) -> Result<ProblemSpec, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Input(format!("{path}: {}", e.into_inner()))
    })
}

fn solver_config(spec: &ProblemSpec, resolution: Option<usize>, seed: Option<u64>) -> SolverConfig {
    let mut cfg = spec.solver_config();
    if let Some(r) = resolution {
        cfg.resolution = r;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg
}

fn load_system(args: &SolveArgs) -> Result<(ConstraintSystem, SolverConfig), CliError> {
    let mut spec = load_spec(&args.spec)?;
    if let Some(p) = args.p {
        spec.norm_p = p;
    }
    let sys = spec.build()?;
    Ok((sys, solver_config(&spec, args.resolution, args.seed)))
}

fn check(outcome: &verify::SuiteOutcome) -> Result<(), CliError> {
    if outcome.ok() {
        return Ok(());
    }
    let reason = outcome.counterexample.as_ref().map(|c| format!("trial {}: {}", c.trial, c.reason)).unwrap_or_default();
    Err(CliError::Failure(format!("{} suite: {} of {} trials failed; {reason}", outcome.suite, outcome.failed, outcome.trials)))
}

fn run_verify(suite: Suite, trials: Option<usize>, seed: u64) -> Result<verify::SuiteOutcome, CliError> {
    Ok(match suite {
        Suite::Frobenius => verify::frobenius(trials.unwrap_or(1000), seed)?,
        Suite::EckartYoung => verify::eckart_young_suite(trials.unwrap_or(100), seed)?,
        Suite::Zigzag => verify::zigzag(trials.unwrap_or(30), seed)?,
        Suite::Chain => {
            let mut systems = Vec::new();
            for (name, spec) in bundled::specs() {
                systems.push((name, spec.build()?));
            }
            systems.extend(verify::random_systems(seed, trials.unwrap_or(50)));
            verify::chain_over(&systems, seed, &SolverConfig::default())?
        }
    })
}

fn perturb_check(mut spec: ProblemSpec, radius: f64, samples: usize, seed: u64) -> Result<PerturbCheckReport, CliError> {
    let pert = spec.perturbation.take().ok_or_else(|| CliError::Input("perturbation: required for perturb-check".into()))?;
    if !(radius > 0.0) || samples == 0 {
        return Err(CliError::Input("--radius must be positive and --samples nonzero".into()));
    }
    let sys = spec.build()?;
    let declared = declared_modulus(&pert, &sys).ok();
    let estimate = perturbation_fn(&pert, &sys).ok().map(|h| lip_estimate(&*h, sys.xbar(), radius, sys.norm(), samples, seed));
    let modulus_ok = match (declared, estimate) {
        (Some(d), Some(e)) => e <= d * (1.0 + 1e-9) + 1e-12,
        _ => true,
    };
    let radii: Vec<f64> = (0..example::DECADES).map(|d| radius / 10f64.powi(d as i32)).collect();
    let model = perturbed_model(&sys, &pert)?;
    let mut before = Vec::new();
    let mut after = Vec::new();
    for &r in &radii {
        before.push(subreg_ratio(&sys, r, samples, seed)?.ratio);
        after.push(subreg_ratio(&*model, r, samples, seed)?.ratio);
    }
    let min_growth = after.windows(2).map(|w| w[1] / w[0]).fold(f64::INFINITY, f64::min);
    Ok(PerturbCheckReport {
        perturbation: pert,
        declared_modulus: declared,
        lip_estimate: estimate,
        modulus_ok,
        radii,
        ratios_unperturbed: before,
        ratios_perturbed: after,
        min_growth,
        diverges: min_growth >= 5.0,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Input("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Input(e.to_string()))?;
    }
    let format = cli.format.unwrap_or(Format::Json);
    let out = cli.out.as_deref();
    match cli.command {
        Command::Constants(args) => {
            let (sys, cfg) = load_system(&args)?;
            emit(&compute_constants(&sys, &cfg)?, format, out)
        }
        Command::Radii(args) => {
            let (sys, cfg) = load_system(&args)?;
            emit(&radius_report(&sys, &cfg)?, format, out)
        }
        Command::Verify { suite, trials, seed } => {
            let outcome = run_verify(suite, trials, seed)?;
            emit(&outcome, format, out)?;
            check(&outcome)
        }
        Command::Example { name, p, resolution, seed } => {
            let cfg = SolverConfig { resolution: resolution.unwrap_or(SolverConfig::default().resolution), ..SolverConfig::default() };
            let report = match name {
                ExampleName::Cone => example::cone(p, &cfg)?,
                ExampleName::Zero => example::zero(p, &cfg, seed)?,
                ExampleName::Staircase => example::staircase(&cfg, seed)?,
            };
            match (cli.format, out) {
                (None, None) => print!("{}", report.table()),
                (None, Some(path)) => std::fs::write(path, report.table()).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
                (Some(f), _) => emit(&report, f, out)?,
            }
            if report.passed {
                Ok(())
            } else {
                Err(CliError::Failure(format!("example {}: some checks failed", report.example)))
            }
        }
        Command::PerturbCheck { spec, p, radius, samples, seed } => {
            let mut spec = load_spec(&spec)?;
            if let Some(p) = p {
                spec.norm_p = p;
            }
            let report = perturb_check(spec, radius, samples, seed)?;
            emit(&report, format, out)?;
            if report.modulus_ok {
                Ok(())
            } else {
                Err(CliError::Failure("sampled Lipschitz constant exceeds the declared modulus".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
