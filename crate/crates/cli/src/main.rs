use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use log::info;
use trialaux::methods::MethodRegistry;
use trialaux::report::{emit_draws, emit_intervals, emit_report, ReportFormat};
use trialaux::scenario::{run_scenario, ScenarioConfig};
use trialaux::Error;

/// Run a disrupted-trial analysis scenario and write its reports.
#[derive(Parser, Debug)]
#[command(name = "trialaux", version)]
struct Args {
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Report format: csv or markdown.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Treat small-bootstrap precision warnings as errors.
    #[arg(long)]
    strict: bool,
}

fn write(dir: &Path, name: &str, text: &str) -> trialaux::Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn run(args: &Args) -> trialaux::Result<()> {
    let format = ReportFormat::parse(&args.format)?;
    if args.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let registry = MethodRegistry::with_builtins();
    let cfg = ScenarioConfig::load(&args.config)?;
    cfg.validate(&registry)?;
    let output = run_scenario(&cfg, &registry, args.strict)?;

    std::fs::create_dir_all(&args.out)?;
    write(&args.out, format.file_name(), &emit_report(&output.rows, format)?)?;
    let (intervals, skipped) = emit_intervals(&output.rows)?;
    if skipped > 0 {
        info!("{skipped} rows without interval bounds");
    }
    write(&args.out, "intervals.csv", &intervals)?;
    if !output.draws.is_empty() {
        write(&args.out, "draws.csv", &emit_draws(&output.draws)?)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_config() => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
    }
}
