//! `epr`: estimate chains from play records, compute EPR and friends, and
//! test them against Monte-Carlo null models.
//!
//! Exit codes: 0 success, 1 data or configuration error, 2 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use epr_core::dataio::{self, AnalysisConfig, Encoding, Report};
use epr_core::pipeline;
use epr_core::synthetic::{driven_square_cycle, ring3, square_cycle, ExactChain};
use epr_core::{simulate_vnm, Seed, StateSpace, TreatmentDataset, VnmParams, ZeroFluxPolicy};

#[derive(Debug, Parser)]
#[command(
    name = "epr",
    version,
    about = "Entropy production rate analysis of discrete play records"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Entropy, EPR, velocity and motion per treatment.
    Analyze(AnalysisArgs),
    /// Compare each treatment with independent mixed-strategy play.
    MinimaxTest(AnalysisArgs),
    /// Test each treatment's EPR against its finite-sample i.i.d. baseline.
    CycleTest(AnalysisArgs),
    /// Regress motion on EPR across treatments.
    MotionFit(AnalysisArgs),
    /// Write synthetic play records as CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct AnalysisArgs {
    /// Play records (CSV).
    #[arg(long)]
    input: PathBuf,
    /// Report destination (JSON).
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte-Carlo replicates per treatment.
    #[arg(long, default_value_t = dataio::DEFAULT_REPS)]
    reps: usize,
    /// skip, strict, or smooth=EPS.
    #[arg(long, default_value = "skip")]
    zero_flux_policy: String,
    /// Rounds dropped from the start of every session.
    #[arg(long, default_value_t = 0)]
    burn_in: usize,
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
    /// State-space descriptor (JSON path) or builtin:square2x2 / builtin:ringN.
    #[arg(long, default_value = "builtin:square2x2")]
    space: String,
    /// Treatment metadata catalog (JSON object keyed by treatment id).
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Worker threads for replicates (0 = one per core).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Omit the timestamp so identical runs produce identical bytes.
    #[arg(long)]
    reproducible: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Model {
    /// Independent row/column randomization with --p and --q.
    Vnm,
    /// Three-state ring with --forward and --backward.
    Ring,
    /// Square cycle with --forward, --backward and --stay.
    Cycle4,
    /// Driven square cycle with --drive in [0, 1].
    Driven,
    /// Arbitrary chain from --transition (and optional --dos0).
    Chain,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CsvEncoding {
    States,
    Actions,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    treatments: usize,
    #[arg(long, default_value_t = 1)]
    sessions: usize,
    #[arg(long)]
    rounds: usize,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    #[arg(long)]
    forward: Option<f64>,
    #[arg(long)]
    backward: Option<f64>,
    #[arg(long)]
    stay: Option<f64>,
    #[arg(long)]
    drive: Option<f64>,
    /// Rows separated by ';', entries by ','.
    #[arg(long)]
    transition: Option<String>,
    /// Initial distribution, comma separated (default: uniform).
    #[arg(long)]
    dos0: Option<String>,
    #[arg(long, value_enum, default_value = "states")]
    encoding: CsvEncoding,
}

fn config_from(args: &AnalysisArgs) -> anyhow::Result<AnalysisConfig> {
    let zero_flux_policy: ZeroFluxPolicy = args.zero_flux_policy.parse()?;
    let space = dataio::load_space(&args.space)?;
    let cfg = AnalysisConfig {
        zero_flux_policy,
        burn_in: args.burn_in,
        mc_reps: args.reps,
        seed: args.seed,
        alpha: args.alpha,
        input: Some(args.input.clone()),
        output: Some(args.output.clone()),
        space_source: args.space.clone(),
        space,
        threads: args.threads,
        reproducible: args.reproducible,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_inputs(args: &AnalysisArgs, cfg: &AnalysisConfig) -> anyhow::Result<Vec<TreatmentDataset>> {
    let mut datasets = dataio::load_csv(&args.input, &cfg.space)?;
    if let Some(meta) = &args.meta {
        dataio::attach_meta(&mut datasets, &dataio::load_treatment_meta(meta)?);
    }
    if datasets.is_empty() {
        return Err(epr_core::Error::EmptyData).context(format!("{} has no records", args.input.display()));
    }
    Ok(datasets)
}

fn progress(msg: &str) {
    eprintln!("{msg}");
}

type Analysis = fn(&[TreatmentDataset], &AnalysisConfig, pipeline::Progress) -> epr_core::Result<Report>;

fn run_analysis(args: &AnalysisArgs, analysis: Analysis) -> anyhow::Result<()> {
    let cfg = config_from(args)?;
    let datasets = load_inputs(args, &cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .context("building worker pool")?;
    let report = pool.install(|| analysis(&datasets, &cfg, &progress))?;
    dataio::write_report(&report, &args.output)?;
    print_summary(&report, &args.output);
    Ok(())
}

fn print_summary(report: &Report, output: &Path) {
    let summary = serde_json::json!({
        "command": report.command,
        "treatments": report.treatments.len(),
        "output": output.display().to_string(),
    });
    println!("{summary}");
}

fn parse_vector(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad number {x:?}")))
        .collect()
}

fn need(v: Option<f64>, flag: &str, model: &str) -> anyhow::Result<f64> {
    v.with_context(|| format!("--{flag} is required for --model {model}"))
}

fn exact_chain(args: &SimulateArgs) -> anyhow::Result<ExactChain> {
    Ok(match args.model {
        Model::Ring => ring3(
            need(args.forward, "forward", "ring")?,
            need(args.backward, "backward", "ring")?,
        )?,
        Model::Cycle4 => square_cycle(
            need(args.forward, "forward", "cycle4")?,
            need(args.backward, "backward", "cycle4")?,
            args.stay.unwrap_or(0.0),
        )?,
        Model::Driven => driven_square_cycle(need(args.drive, "drive", "driven")?)?,
        Model::Chain => {
            let spec = args
                .transition
                .as_deref()
                .context("--transition is required for --model chain")?;
            let transition = spec.split(';').map(parse_vector).collect::<anyhow::Result<Vec<_>>>()?;
            let r = transition.len();
            let dos = match &args.dos0 {
                Some(d) => parse_vector(d)?,
                None => vec![1.0 / r as f64; r],
            };
            let space = if r == 4 {
                StateSpace::square_2x2()
            } else {
                StateSpace::ring(r)?
            };
            ExactChain { space, dos, transition }
        }
        Model::Vnm => unreachable!("vnm has no transition matrix"),
    })
}

fn simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    if args.rounds < 2 {
        bail!(epr_core::Error::InvalidParameter("--rounds must be at least 2".into()));
    }
    if args.treatments == 0 || args.sessions == 0 {
        bail!(epr_core::Error::InvalidParameter(
            "--treatments and --sessions must be positive".into()
        ));
    }
    let root = Seed::new(args.seed);
    let datasets = match args.model {
        Model::Vnm => {
            let params = VnmParams::new(args.p, args.q, args.sessions, args.rounds)?;
            let space = StateSpace::square_2x2();
            (0..args.treatments)
                .map(|k| {
                    let d = simulate_vnm(&params, &space, root.derive(k as u64))?;
                    TreatmentDataset::new(format!("T{}", k + 1), space.clone(), d.sessions().to_vec())
                })
                .collect::<epr_core::Result<Vec<_>>>()?
        }
        _ => {
            let chain = exact_chain(args)?;
            (0..args.treatments)
                .map(|k| {
                    chain.dataset(
                        &format!("T{}", k + 1),
                        args.sessions,
                        args.rounds,
                        root.derive(k as u64),
                    )
                })
                .collect::<epr_core::Result<Vec<_>>>()?
        }
    };
    let encoding = match args.encoding {
        CsvEncoding::States => Encoding::States,
        CsvEncoding::Actions => Encoding::Actions,
    };
    dataio::write_csv(&args.output, &datasets, encoding)?;
    let summary = serde_json::json!({
        "command": "simulate",
        "treatments": datasets.len(),
        "output": args.output.display().to_string(),
    });
    println!("{summary}");
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<epr_core::Error>() {
        Some(e) if e.is_internal() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Analyze(a) => run_analysis(a, pipeline::analyze),
        Command::MinimaxTest(a) => run_analysis(a, pipeline::minimax_test),
        Command::CycleTest(a) => run_analysis(a, pipeline::cycle_test),
        Command::MotionFit(a) => run_analysis(a, pipeline::motion_fit),
        Command::Simulate(s) => simulate(s),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
