use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use onionlab::experiment::{
    param_calc, run_experiment, sweep, write_report, write_sweep, write_trials_csv, ExperimentError, RunConfig,
};

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "onionlab", version, about = "Onion-routing protocol experiments")]
struct Cli {
    /// Repeat for more log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run config.
    config: PathBuf,
    /// Directory for the report and CSV files.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores). Does not change results.
    #[arg(short, long)]
    workers: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write report.json + trials.csv.
    Run(RunArgs),
    /// Run the config's parameter grid and write sweep.csv + sweep.json.
    Sweep(RunArgs),
    /// Abort threshold, αβ bound and a balanced (α, β).
    ParamCalc {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0.5)]
        c: f64,
        #[arg(long, default_value_t = 0.5)]
        d: f64,
        #[arg(long, default_value_t = 0.0)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        log2_lambda: f64,
    },
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        if e.is_config() {
            Failure::Config(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn load(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(runtime)?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(runtime)
}

fn execute(cmd: Command) -> Result<bool, Failure> {
    match cmd {
        Command::Run(args) => {
            let cfg = load(&args)?;
            log::info!("running {} trials of {}", cfg.trials, cfg.protocol);
            let (report, records) = run_experiment(&cfg)?;
            write_report(&report, create(&args.out, &cfg.output.report)?)?;
            write_trials_csv(&records, create(&args.out, &cfg.output.trials_csv)?)?;
            for v in &report.checks {
                println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
            }
            if report.partial {
                println!("PARTIAL: {} of {} trials", report.completed_trials, report.trials);
            }
            Ok(report.pass)
        }
        Command::Sweep(args) => {
            let cfg = load(&args)?;
            let table = sweep(&cfg)?;
            write_sweep(&table, create(&args.out, &cfg.output.sweep_csv)?)?;
            let json = create(&args.out, "sweep.json")?;
            serde_json::to_writer_pretty(json, &table).map_err(runtime)?;
            println!(
                "{} grid points, {} passing",
                table.rows.len(),
                table.rows.iter().filter(|r| r.pass).count()
            );
            Ok(table.pass())
        }
        Command::ParamCalc {
            epsilon,
            delta,
            c,
            d,
            kappa,
            log2_lambda,
        } => {
            let ok = epsilon > 0.0
                && delta > 0.0
                && delta < 1.0
                && (0.0..1.0).contains(&c)
                && (0.0..1.0).contains(&d)
                && (0.0..1.0).contains(&kappa)
                && log2_lambda > 0.0;
            if !ok {
                return Err(Failure::Config(anyhow::anyhow!(
                    "need epsilon > 0, delta, c, d, kappa in their unit ranges and log2_lambda > 0"
                )));
            }
            let pc = param_calc(epsilon, delta, c, d, kappa, log2_lambda);
            println!("{}", serde_json::to_string_pretty(&pc).map_err(runtime)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
