mod bench;
mod io;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qkbp::envelope::{build_envelope, DEFAULT_GRID_SIZE};
use qkbp::generators::{generate, Family, GeneratorSpec, Strategy};
use qkbp::instance::parse_rational;
use qkbp::{Budget, Rational};

use crate::io::{load_instance, write_output, InstanceFormat, Manifest};
use crate::run::{records_to_csv, run_algo, Algo, RunContext};

#[derive(Parser)]
#[command(name = "qkbp", version, about = "Quadratic knapsack breakpoints heuristic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark instance and its manifest.
    Generate(GenerateArgs),
    /// Solve an instance for one or more budgets.
    Solve(SolveArgs),
    /// Export the breakpoint envelope of an instance.
    Envelope(EnvelopeArgs),
    /// Run algorithms over generated instances and aggregate the results.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Standard,
    Large,
    Dispersion,
    #[value(name = "teamformation1")]
    TeamFormation1,
    #[value(name = "teamformation2")]
    TeamFormation2,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    family: FamilyArg,
    #[arg(long)]
    n: usize,
    /// Percent of node pairs with a utility.
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    strategy: Option<String>,
    /// Number of projects for team formation.
    #[arg(long)]
    projects: Option<usize>,
    /// Comma-separated budget fractions.
    #[arg(long, value_delimiter = ',')]
    gammas: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct InstanceArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value_t = InstanceFormat::Canonical)]
    format: InstanceFormat,
    /// Comma-separated absolute budgets.
    #[arg(long, value_delimiter = ',')]
    budgets: Vec<i64>,
    /// Comma-separated budget fractions of the total node cost.
    #[arg(long, value_delimiter = ',')]
    gammas: Vec<String>,
    /// Manifest to take budgets and the seed from.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Number of multipliers in the parametric grid.
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    p: usize,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InstanceArgs,
    #[arg(long, value_enum, default_value_t = Algo::Qkbp)]
    algo: Algo,
    /// Seconds; applies to rg.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Results CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-budget solution sets as JSON.
    #[arg(long)]
    solutions: Option<PathBuf>,
}

#[derive(Args)]
struct EnvelopeArgs {
    #[command(flatten)]
    input: InstanceArgs,
    /// Envelope CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON sidecar with full breakpoint sets and solution markers.
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Glob matching manifest JSON files.
    manifests: String,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Algo::Qkbp, Algo::Rg, Algo::Wsort])]
    algos: Vec<Algo>,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    p: usize,
    /// Per-run records CSV.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Aggregated table CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_gammas(raw: &[String]) -> Result<Vec<Rational>> {
    raw.iter()
        .map(|g| parse_rational(g).with_context(|| format!("bad budget fraction {g:?}")))
        .collect()
}

fn time_limit(raw: Option<f64>) -> Result<Option<Duration>> {
    raw.map(|s| Duration::try_from_secs_f64(s).with_context(|| format!("bad time limit {s}")))
        .transpose()
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let family = match args.family {
        FamilyArg::Standard => Family::Standard,
        FamilyArg::Large => Family::Large,
        FamilyArg::Dispersion => Family::Dispersion,
        FamilyArg::TeamFormation1 => Family::TeamFormation1,
        FamilyArg::TeamFormation2 => Family::TeamFormation2,
    };
    let team = matches!(family, Family::TeamFormation1 | Family::TeamFormation2);
    let density = match (args.density, team) {
        (Some(_), true) => bail!(qkbp::Error::InvalidParameter(
            "team formation derives its density from project overlap".into()
        )),
        (None, true) => 0.0,
        (Some(d), false) => d,
        (None, false) => bail!(qkbp::Error::InvalidParameter("--density is required".into())),
    };
    if args.strategy.is_some() != (family == Family::Dispersion) {
        bail!(qkbp::Error::InvalidParameter(
            "--strategy is required for dispersion and not accepted otherwise".into()
        ));
    }
    if args.projects.is_some() && !team {
        bail!(qkbp::Error::InvalidParameter("--projects only applies to team formation".into()));
    }
    let strategy = args.strategy.as_deref().map(str::parse::<Strategy>).transpose()?;
    let spec = GeneratorSpec {
        family,
        n: args.n,
        density,
        strategy,
        projects: args.projects,
        gammas: parse_gammas(&args.gammas)?,
        seed: args.seed,
    };
    let generated = generate(&spec)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let manifest = Manifest::write(&args.out, &spec, &generated)?;
    println!("{}", manifest.display());
    Ok(())
}

struct Loaded {
    instance: qkbp::QkpInstance,
    budgets: Vec<Budget>,
    seed: Option<u64>,
}

fn load(args: &InstanceArgs, budgets_required: bool) -> Result<Loaded> {
    let file = load_instance(&args.file, args.format)?;
    let mut instance = file.instance;
    let mut seed = None;
    let mut budgets = Vec::new();
    if let Some(path) = &args.manifest {
        let manifest = Manifest::read(path)?;
        seed = Some(manifest.spec.seed);
        instance.set_name(manifest.spec.name());
        budgets = manifest.budgets;
    }
    for &b in &args.budgets {
        budgets.push(Budget::new(b)?);
    }
    for g in parse_gammas(&args.gammas)? {
        budgets.push(Budget::from_fraction(instance.total_cost(), g)?);
    }
    if args.manifest.is_none() && args.budgets.is_empty() && args.gammas.is_empty() {
        budgets = file.budgets;
    }
    if budgets_required && budgets.is_empty() {
        bail!(qkbp::Error::InvalidParameter(
            "no budgets: pass --budgets, --gammas or --manifest, or add budget lines".into()
        ));
    }
    Ok(Loaded {
        instance,
        budgets,
        seed,
    })
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let loaded = load(&args.input, true)?;
    let ctx = RunContext {
        p: args.input.p,
        time_limit: time_limit(args.time_limit)?,
        seed: loaded.seed,
    };
    let mut records = run_algo(&loaded.instance, &loaded.budgets, args.algo, &ctx)?;
    run::fill_deviation(&mut records);
    if let Some(path) = &args.solutions {
        let json = serde_json::to_string_pretty(&run::solutions_json(&records))?;
        write_output(Some(path), &(json + "\n"))?;
    }
    write_output(args.out.as_deref(), &records_to_csv(&records)?)
}

fn cmd_envelope(args: EnvelopeArgs) -> Result<()> {
    let loaded = load(&args.input, false)?;
    let env = build_envelope(&loaded.instance, args.input.p)?;
    if let Some(path) = &args.sidecar {
        let results = qkbp::qkbp::solve(&loaded.instance, &env, &loaded.budgets)?;
        let json = serde_json::to_string_pretty(&io::envelope_json(&loaded.instance, &env, &results))?;
        write_output(Some(path), &(json + "\n"))?;
    }
    write_output(args.out.as_deref(), &env.to_csv())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<qkbp::Error>() {
            return match e {
                qkbp::Error::Parse { .. } => 2,
                qkbp::Error::Invariant(_) | qkbp::Error::Overflow { .. } | qkbp::Error::EnvelopeMismatch => 3,
                _ => 1,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Envelope(a) => cmd_envelope(a),
        Command::Bench(a) => bench::cmd_bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
