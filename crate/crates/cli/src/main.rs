use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlsort::experiment::{
    run_experiment, sweep, write_csv, write_jsonl, Algorithm, Axis, ExperimentConfig, InputDistribution,
    MetricsRecord, Verdict, DEFAULT_VERIFY_CAP,
};
use mlsort::{DeliveryScheme, SortError};

#[derive(Parser)]
#[command(name = "mlsort", version, about = "Run simulated multi-level sorting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration.
    Sort(RunArgs),
    /// Run a configuration for every value of one parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `param=v1,v2,...`, e.g. `ab=16,64,256` or `pes=16,64`.
        #[arg(long)]
        axis: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "ams")]
    algo: String,
    #[arg(long, default_value_t = 8)]
    pes: usize,
    #[arg(long, default_value_t = 1000)]
    n_per_pe: usize,
    #[arg(long, default_value_t = 1)]
    levels: usize,
    /// Group count per level, comma separated.
    #[arg(long, value_delimiter = ',')]
    groups: Option<Vec<usize>>,
    /// Oversampling factor (default 1.6·log10 n).
    #[arg(long)]
    a: Option<f64>,
    #[arg(long, default_value_t = 16)]
    b: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value = "deterministic")]
    delivery: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// uniform, sorted, reverse, zipf:THETA or equal.
    #[arg(long, default_value = "uniform")]
    dist: String,
    #[arg(long, default_value_t = 100.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "jsonl")]
    format: Format,
    /// Check every output against a sequential sort.
    #[arg(long)]
    verify: bool,
    #[arg(long, default_value_t = DEFAULT_VERIFY_CAP)]
    verify_cap: u64,
    /// Also record wall-clock time (makes output non-reproducible).
    #[arg(long)]
    wall_clock: bool,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig, SortError> {
        let groups = self.groups.clone();
        Ok(ExperimentConfig {
            algorithm: self.algo.parse::<Algorithm>()?,
            p: self.pes,
            n_per_pe: self.n_per_pe,
            levels: groups.as_ref().map_or(self.levels, Vec::len),
            groups,
            a: self.a,
            b: self.b,
            eps: self.eps,
            delivery: self.delivery.parse::<DeliveryScheme>()?,
            seed: self.seed,
            repetitions: self.reps,
            distribution: self.dist.parse::<InputDistribution>()?,
            alpha: self.alpha,
            beta: self.beta,
            verify: self.verify,
            verify_cap: self.verify_cap,
            wall_clock: self.wall_clock,
        })
    }
}

fn emit(args: &RunArgs, records: &[MetricsRecord]) -> io::Result<()> {
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = BufWriter::new(sink);
    match args.format {
        Format::Jsonl => write_jsonl(&mut w, records)?,
        Format::Csv => write_csv(&mut w, records)?,
    }
    w.flush()
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let (args, records) = match &cli.command {
        Command::Sort(args) => (args, run_experiment(&args.config()?)?),
        Command::Sweep { run, axis } => (run, sweep(&run.config()?, &axis.parse::<Axis>()?)?),
    };
    emit(args, &records)?;
    let failed = records.iter().filter(|r| r.verdict == Verdict::Fail).count();
    if failed > 0 {
        eprintln!("verification failed for {failed} of {} runs", records.len());
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
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
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
