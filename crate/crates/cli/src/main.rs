//! `ltlf`: evaluate, score and differentiate LTL_f constraints over trace
//! files, and run the trajectory experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ltlf_core::corpus::{corpus, CorpusLimits};
use ltlf_core::gradcheck::{gradcheck, GradcheckOptions, DEFAULT_TOLERANCE};
use ltlf_core::oracle::{eval_ref, loss_ref};
use ltlf_core::trajectory::experiments::{run_experiment, ExperimentConfig, ExperimentKind};
use ltlf_core::trajectory::optimize::{optimize, MixedLossSpec, OptimizeSpec, Optimizer};
use ltlf_core::trajectory::{DynamicalSystem, Trajectory};
use ltlf_core::{
    dloss, eval, loss, parse_surface, Constraint, Error, Gamma, LossConfig, RealTensor, TraceBatch,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXIT_PARSE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_DIVERGENCE: u8 = 4;
const EXIT_GRADCHECK: u8 = 5;

#[derive(Parser)]
#[command(name = "ltlf", version, about = "Differentiable LTL_f constraints over trace tensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Boolean value of a constraint per batch element.
    Eval(TraceArgs),
    /// Smooth loss per batch element.
    Loss(SmoothArgs),
    /// Derivative of the loss with respect to every trace element.
    Grad(SmoothArgs),
    /// Compare the gradient against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Optimise a planar trajectory against a constraint.
    Optimize(OptimizeArgs),
    /// Run one of the named trajectory scenarios.
    Experiment(ExperimentArgs),
    #[command(hide = true)]
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct FormulaArgs {
    /// Formula text.
    #[arg(short, long, conflicts_with = "formula_file", required_unless_present = "formula_file")]
    formula: Option<String>,
    /// File holding the formula text.
    #[arg(long)]
    formula_file: Option<PathBuf>,
}

impl FormulaArgs {
    fn text(&self) -> ltlf_core::Result<String> {
        match (&self.formula, &self.formula_file) {
            (Some(text), _) => Ok(text.clone()),
            (None, Some(path)) => Ok(std::fs::read_to_string(path)?),
            (None, None) => Err(Error::Invalid("no formula given".into())),
        }
    }
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    formula: FormulaArgs,
    /// Trace tensor as JSON `{dims, elems}`, or CSV with one row per step.
    #[arg(long)]
    trace: PathBuf,
    /// Start step.
    #[arg(short, long, default_value_t = 0)]
    t: usize,
}

impl TraceArgs {
    fn load(&self) -> ltlf_core::Result<(Constraint, TraceBatch)> {
        let formula = Constraint::parse(&self.formula.text()?)?;
        let trace = TraceBatch::load(&self.trace)?;
        Ok((formula, trace))
    }
}

#[derive(Args)]
struct SmoothArgs {
    #[command(flatten)]
    trace: TraceArgs,
    /// Smoothing factor; zero or below is exact.
    #[arg(short, long, default_value_t = 0.005, allow_negative_numbers = true)]
    gamma: f64,
    /// Stable kernels (the default).
    #[arg(long, conflicts_with = "naive")]
    stable: bool,
    /// Naive kernels, for differential testing only.
    #[arg(long)]
    naive: bool,
}

impl SmoothArgs {
    fn config(&self) -> LossConfig {
        let gamma = if self.naive {
            Gamma::naive(self.gamma)
        } else {
            Gamma::new(self.gamma)
        };
        LossConfig::new(gamma)
    }
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    smooth: SmoothArgs,
    /// Relative tolerance per element.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Extra tolerances to report failure counts for.
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<f64>,
    /// Add 1 to the analytic gradient at this flat index.
    #[arg(long, hide = true)]
    corrupt: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Gd,
    Momentum,
    Adam,
}

impl From<OptimizerArg> for Optimizer {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::Gd => Optimizer::Gd,
            OptimizerArg::Momentum => Optimizer::momentum(),
            OptimizerArg::Adam => Optimizer::adam(),
        }
    }
}

#[derive(Args)]
struct OptimizeArgs {
    /// Constraint over trajectory measurements, e.g. `G (0.1 <= dist(p, (0.4, 0.4)))`.
    #[arg(short, long)]
    constraint: String,
    /// Initial trajectory CSV (`x,y[,vx,vy]` columns). Defaults to a noisy
    /// straight line from (0,0) to (1,1).
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(short, long, default_value_t = 0.005)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Weight of the position/velocity consistency loss.
    #[arg(long, default_value_t = 0.0)]
    dynamical_weight: f64,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Gd)]
    optimizer: OptimizerArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_parser = parse_kind)]
    name: ExperimentKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(short, long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Defaults to momentum 0.9.
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Engine(Error),
    Gradcheck(String),
    Selftest(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Syntax { .. } | Error::UnknownIdentifier(_) => EXIT_PARSE,
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        _ => EXIT_DATA,
    }
}

fn print_json(value: &impl serde::Serialize) -> ltlf_core::Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn print_tensor(t: &RealTensor) -> ltlf_core::Result<()> {
    print_json(t)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Eval(args) => {
            let (formula, trace) = args.load()?;
            print_json(&eval(&formula, &trace, args.t)?)?;
        }
        Command::Loss(args) => {
            let (formula, trace) = args.trace.load()?;
            print_tensor(&loss(&formula, &trace, args.trace.t, &args.config())?)?;
        }
        Command::Grad(args) => {
            let (formula, trace) = args.trace.load()?;
            print_tensor(&dloss(&formula, &trace, args.trace.t, &args.config())?)?;
        }
        Command::Gradcheck(args) => {
            let s = &args.smooth;
            let (formula, trace) = s.trace.load()?;
            let opts = GradcheckOptions {
                tolerance: args.tolerance,
                corrupt: args.corrupt,
                ..GradcheckOptions::default()
            };
            let report = gradcheck(&formula, &trace, s.trace.t, &s.config(), &opts)?;
            let sweep: Vec<_> = report
                .sweep(&args.sweep)
                .into_iter()
                .map(|(tolerance, failures)| serde_json::json!({"tolerance": tolerance, "failures": failures}))
                .collect();
            let mut json = serde_json::to_value(&report).map_err(Error::from)?;
            json["sweep"] = sweep.into();
            print_json(&json)?;
            if !report.passed {
                return Err(Failure::Gradcheck(format!(
                    "{} of {} elements exceed tolerance {}; worst at {:?}",
                    report.failures, report.checked, report.tolerance, report.argmax
                )));
            }
        }
        Command::Optimize(args) => optimize_cmd(&args)?,
        Command::Experiment(args) => {
            let mut cfg = ExperimentConfig::new(args.name);
            cfg.seed = args.seed;
            if let Some(v) = args.steps {
                cfg.steps = v;
            }
            if let Some(v) = args.lr {
                cfg.lr = v;
            }
            if let Some(v) = args.gamma {
                cfg.gamma = v;
            }
            if let Some(v) = args.eta {
                cfg.eta = v;
            }
            if let Some(v) = args.optimizer {
                cfg.optimizer = v.into();
            }
            let outcome = run_experiment(&cfg)?;
            outcome.write_artifacts(&args.out)?;
            print_json(&outcome.verdict)?;
        }
        Command::Selftest(args) => selftest(&args)?,
    }
    Ok(())
}

fn optimize_cmd(args: &OptimizeArgs) -> Result<(), Failure> {
    let formula = parse_surface(&args.constraint)?;
    let initial = match &args.init {
        Some(path) => Trajectory::from_csv_reader(std::fs::File::open(path).map_err(Error::from)?, args.dt)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            Trajectory::straight_line([0.0, 0.0], [1.0, 1.0], args.samples, args.dt)?
                .jitter(&mut rng, args.noise)
        }
    };
    let initial = if args.dynamical_weight != 0.0 && initial.velocities.is_none() {
        initial.with_difference_velocities()
    } else {
        initial
    };
    let system = (args.dynamical_weight != 0.0).then(|| {
        let p = &initial.positions;
        DynamicalSystem::new(p[0], p[p.len() - 1])
    });
    let spec = OptimizeSpec {
        loss: MixedLossSpec {
            gamma: Gamma::new(args.gamma),
            eta: args.eta,
            dynamical_weight: args.dynamical_weight,
            system,
        },
        steps: args.steps,
        lr: args.lr,
        optimizer: args.optimizer.into(),
    };
    let outcome = optimize(&initial, &formula, &spec)?;
    write_optimize_artifacts(&args.out, args, &spec, &outcome)?;
    print_json(outcome.history.last().expect("history is never empty"))?;
    Ok(())
}

fn write_optimize_artifacts(
    dir: &Path,
    args: &OptimizeArgs,
    spec: &OptimizeSpec,
    outcome: &ltlf_core::trajectory::OptimizeOutcome,
) -> ltlf_core::Result<()> {
    std::fs::create_dir_all(dir)?;
    let config = serde_json::json!({
        "constraint": args.constraint,
        "seed": args.seed,
        "noise": args.noise,
        "samples": args.samples,
        "dt": args.dt,
        "init": args.init,
        "spec": spec,
    });
    std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&config)? + "\n")?;
    std::fs::write(dir.join("trajectory.csv"), outcome.trajectory.to_csv())?;
    std::fs::write(dir.join("loss_history.csv"), outcome.history_csv())?;
    Ok(())
}

fn selftest(args: &SelftestArgs) -> Result<(), Failure> {
    let instances = corpus(args.seed, args.count, &CorpusLimits::default());
    let mut mismatches = 0;
    for inst in &instances {
        let fast = eval(&inst.formula, &inst.trace, inst.t)?;
        let smooth = loss(&inst.formula, &inst.trace, inst.t, &LossConfig::new(0.05))?;
        for (b, slice) in inst.slices().iter().enumerate() {
            let reference = eval_ref(&inst.formula, slice, inst.t)?;
            let l = loss_ref(&inst.formula, slice, inst.t, 0.05)?;
            let agrees = fast.elems()[b] == reference
                && (smooth.elems()[b] - l).abs() <= 1e-12 * l.abs().max(1.0);
            if !agrees {
                mismatches += 1;
            }
        }
    }
    println!(
        "{}",
        serde_json::json!({"instances": instances.len(), "mismatches": mismatches})
    );
    if mismatches > 0 {
        return Err(Failure::Selftest(format!("{mismatches} disagreements with the oracle")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Engine(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Gradcheck(msg)) => {
            eprintln!("gradcheck failed: {msg}");
            ExitCode::from(EXIT_GRADCHECK)
        }
        Err(Failure::Selftest(msg)) => {
            eprintln!("selftest failed: {msg}");
            ExitCode::FAILURE
        }
    }
}
