//! spinlab: experiments on classical lattice spin systems from the command
//! line. Exit codes: 0 pass, 1 usage or configuration error, 2 fail,
//! 3 inconclusive.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "spinlab",
    version,
    about = "Numerical laboratory for classical lattice spin systems"
)]
struct Cli {
    /// TOML run configuration; command-line flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; chain c derives its stream from (seed, c).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path for the report or sample stream.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct CommonArgs {
    /// Bundled model name or model file path.
    #[arg(long)]
    model: Option<String>,
    /// Window extents, e.g. `16` or `8x8`.
    #[arg(long)]
    window: Option<String>,
    /// Boundary: periodic | free | north | south | zero.
    #[arg(long)]
    boundary: Option<String>,
    /// Region sites, e.g. `0;1` (coordinates comma-separated).
    #[arg(long)]
    lambda: Option<String>,
    /// Outer region for compat-check.
    #[arg(long)]
    lambda_outer: Option<String>,
    /// Corpus: `default`, a bundled name, or a file path.
    #[arg(long)]
    corpus: Option<String>,
    /// Expectation engine: quadrature | mcmc.
    #[arg(long)]
    engine: Option<String>,
    /// Kernel / field inverse temperature (default from the model file).
    #[arg(long)]
    beta: Option<f64>,
    /// Sampling inverse temperature (negative controls; default = beta).
    #[arg(long)]
    beta_sample: Option<f64>,
    /// Quadrature order (nodes per 1-D direction).
    #[arg(long)]
    order: Option<usize>,
    /// Quadrature order of inner/conditional kernels.
    #[arg(long)]
    inner_order: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    /// Proposal: uniform, or cone:K with initial cap width K.
    #[arg(long)]
    proposal: Option<String>,
    /// Also write the residual table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Metropolis sampler and write configurations as JSON lines.
    Sample(CommonArgs),
    /// KMS residuals of a Gibbs state against its own vector field.
    KmsCheck(CommonArgs),
    /// DLR invariance of the periodic-box Gibbs measure.
    DlrCheck(CommonArgs),
    /// Kernel compatibility on nested regions.
    CompatCheck(CommonArgs),
    /// Bracket annihilation of the tilted functional.
    TiltCheck(CommonArgs),
    /// Time the core numerical kernels.
    Bench,
    /// List bundled models; give a name for details.
    ListModels { name: Option<String> },
}

fn merge(cli_cfg: Option<&PathBuf>, args: &CommonArgs, cli: &Cli) -> anyhow::Result<RunConfig> {
    let base = match cli_cfg {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        model: args.model.clone(),
        window: args.window.clone(),
        boundary: args.boundary.clone(),
        lambda: args.lambda.clone(),
        lambda_outer: args.lambda_outer.clone(),
        corpus: args.corpus.clone(),
        engine: args.engine.clone(),
        beta: args.beta,
        beta_sample: args.beta_sample,
        quadrature_order: args.order,
        inner_order: args.inner_order,
        sweeps: args.sweeps,
        burn_in: args.burn_in,
        thin: args.thin,
        chains: args.chains,
        proposal: args.proposal.clone(),
        seed: cli.seed,
        out: cli.out.as_ref().map(|p| p.display().to_string()),
        csv: args.csv.as_ref().map(|p| p.display().to_string()),
        threads: cli.threads,
    };
    Ok(base.overlaid(flags))
}

fn run() -> anyhow::Result<ExitCode> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return Ok(ExitCode::SUCCESS);
        }
        Err(e) => {
            eprint!("{e}");
            return Ok(ExitCode::from(1));
        }
    };

    let resolve = |args: &CommonArgs| -> anyhow::Result<config::ResolvedRun> {
        let run = config::resolve(&merge(cli.config.as_ref(), args, &cli)?)?;
        if let Some(n) = run.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .ok();
        }
        Ok(run)
    };

    match &cli.command {
        Command::Bench => commands::bench(),
        Command::ListModels { name } => commands::list_models(name.as_deref()),
        Command::Sample(args) => commands::sample(&resolve(args)?),
        Command::KmsCheck(args) => commands::kms_check(&resolve(args)?),
        Command::DlrCheck(args) => commands::dlr_check(&resolve(args)?),
        Command::CompatCheck(args) => commands::compat_check(&resolve(args)?),
        Command::TiltCheck(args) => commands::tilt_check(&resolve(args)?),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
