use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use driftbench::experiment::{self, ExperimentConfig, ExperimentOutcome};
use driftbench::report::{load_results, render_report};
use driftbench::stream::{fixtures, materialize, write_csv, DriftKind, StreamSpec};

const OUT_ENV: &str = "DRIFTBENCH_OUT";

#[derive(Parser)]
#[command(
    name = "driftbench",
    version,
    about = "Drift detection benchmark runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stream x ensemble x detector x seed combination of a config.
    Run(RunArgs),
    /// Run a tuning grid and write the best configuration per ensemble and detector.
    Sweep(RunArgs),
    /// Render a results.csv as a markdown MTD(FA) table.
    Report {
        /// results.csv written by `run` or `sweep`.
        results: PathBuf,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a stream to CSV.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; DRIFTBENCH_OUT takes precedence.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent runs.
    #[arg(long)]
    jobs: Option<usize>,
    /// Added to every configured seed.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
}

#[derive(Args)]
struct GenArgs {
    /// Built-in fixture name or path to a stream TOML file.
    stream: String,
    #[arg(long)]
    kind: Option<String>,
    /// Stream length; requires --interval.
    #[arg(long, requires = "interval")]
    length: Option<usize>,
    /// Drift interval; requires --length.
    #[arg(long, requires = "length")]
    interval: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(env) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    flag.or_else(|| cfg.out.as_ref().map(|p| cfg.base_dir.join(p)))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn jobs(flag: Option<usize>) -> usize {
    flag.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn summarize(outcome: &ExperimentOutcome, dir: &Path) -> anyhow::Result<()> {
    for n in &outcome.notices {
        eprintln!("note: {n}");
    }
    eprintln!("{} runs written to {}", outcome.rows.len(), dir.display());
    if !outcome.failures.is_empty() {
        for (id, msg) in &outcome.failures {
            eprintln!("run {id} failed: {msg}");
        }
        bail!(
            "{} of {} runs failed",
            outcome.failures.len(),
            outcome.failures.len() + outcome.rows.len()
        );
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let dir = out_dir(args.out, &cfg);
    let plans = experiment::plan_runs(&cfg, args.seed_offset)?;
    let outcome = experiment::execute(&plans, jobs(args.jobs))?;
    experiment::write_outputs(&dir, &outcome)?;
    summarize(&outcome, &dir)
}

fn cmd_sweep(args: RunArgs) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let dir = out_dir(args.out, &cfg);
    let result = experiment::sweep(&cfg, args.seed_offset, jobs(args.jobs))?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    result.write(&dir)?;
    let mut stdout = io::stdout().lock();
    for t in &result.tuning {
        let score = t.score.map_or("-".to_string(), |s| format!("{s:.4}"));
        let mtd = t.mtd.map_or("-".to_string(), |m| format!("{m:.1}"));
        writeln!(
            stdout,
            "{} {} #{} {} score={score} da={:.3} fa={:.2} mtd={mtd} {}",
            t.ensemble_type, t.detector, t.rank, t.fingerprint, t.da, t.fa, t.config_json
        )?;
    }
    for (name, _) in &result.best {
        writeln!(stdout, "winner: {}", dir.join(name).display())?;
    }
    summarize(&result.experiment, &dir)
}

fn cmd_report(results: &Path, out: Option<PathBuf>) -> anyhow::Result<()> {
    let rows = load_results(results)?;
    let table = render_report(&rows);
    match out {
        Some(path) => fs::write(&path, table).with_context(|| path.display().to_string())?,
        None => io::stdout().lock().write_all(table.as_bytes())?,
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> anyhow::Result<()> {
    let path = Path::new(&args.stream);
    let mut spec = if path.is_file() {
        StreamSpec::load(path)?
    } else {
        fixtures::builtin(&args.stream)?
    };
    if let (Some(length), Some(interval)) = (args.length, args.interval) {
        spec = spec.rescaled(length, interval)?;
    }
    if let Some(kind) = &args.kind {
        spec.drift.kind = kind.parse::<DriftKind>()?;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let instances = materialize(&spec)?;
    match args.out {
        Some(p) => {
            let file = fs::File::create(&p).with_context(|| p.display().to_string())?;
            write_csv(&instances, io::BufWriter::new(file))?;
        }
        None => write_csv(&instances, io::stdout().lock())?,
    }
    Ok(())
}

/// The reader of stdout went away (e.g. `driftbench gen SEA0 | head`).
fn closed_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>()
            .is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<driftbench::Error>()
                .is_some_and(driftbench::Error::is_broken_pipe)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report { results, out } => cmd_report(&results, out),
        Command::Gen(a) => cmd_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if closed_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e
                .downcast_ref::<driftbench::Error>()
                .is_some_and(driftbench::Error::is_config);
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}
