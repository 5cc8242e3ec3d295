use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use voxframe::pipeline::{report, Pipeline, PipelineConfig, Stage};
use voxframe::Error;

/// Voxel topology optimization to optimized frames and CSG solids.
#[derive(Parser)]
#[command(name = "voxframe", version)]
struct Cli {
    #[command(flatten)]
    verbosity: Verbosity,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Verbosity {
    /// More log output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only warnings and errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run pipeline stages for a configuration.
    Run {
        config: PathBuf,
        /// Stages to run, comma separated (default: all).
        #[arg(long, value_delimiter = ',', value_parser = parse_stage)]
        stages: Vec<Stage>,
        /// Run directory; overrides `output_dir` from the configuration.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Summarize a finished run directory.
    Report {
        run_dir: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Check a configuration file without running anything.
    ValidateConfig { config: PathBuf },
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Empty(_) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, stages, output } => {
            let cfg = PipelineConfig::load(&config)?;
            let dir = output
                .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name));
            let stages = if stages.is_empty() { Stage::ALL.to_vec() } else { stages };
            let pipeline = Pipeline::new(cfg, &dir)?;
            let manifest = pipeline.run(&stages)?;
            for r in manifest.stages.iter().filter(|r| stages.contains(&r.stage)) {
                println!("{:<10} {:>9.2} s  {} files", r.stage.name(), r.wall_time_s, r.outputs.len());
            }
            println!("run directory: {}", dir.display());
        }
        Command::Report { run_dir, json } => {
            let r = report(&run_dir)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                print!("{}", r.render());
            }
        }
        Command::ValidateConfig { config } => {
            let cfg = PipelineConfig::load(&config)?;
            println!("{}: ok ({} voxels)", config.display(), cfg.problem.grid.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match (cli.verbosity.quiet, cli.verbosity.verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().format_timestamp_secs().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
