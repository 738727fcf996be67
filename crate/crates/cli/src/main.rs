use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use otlab_cli::config::ExperimentConfig;
use otlab_cli::error::CliError;

#[derive(Parser)]
#[command(name = "otlab", version, about = "Runs the transport verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run suites and write records.
    Run {
        #[arg(long)]
        suite: Option<String>,
        /// May be repeated.
        #[arg(long = "instance")]
        instances: Vec<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print records as JSON lines instead of the summary table.
        #[arg(long)]
        json: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// List suites with their anchors.
    List {
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command.unwrap_or(Command::List { json: false }) {
        Command::List { json } => {
            if json {
                for l in otlab_cli::list_suites() {
                    println!("{}", serde_json::to_string(&l).expect("listing serializes"));
                }
            } else {
                print!("{}", otlab_cli::list_text());
            }
            ExitCode::SUCCESS
        }
        Command::Run { suite, instances, config, seed, out, json, workers } => {
            match run(suite, instances, config, seed, out, json, workers) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(1),
                Err(e @ CliError::Config { .. }) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(3)
                }
            }
        }
    }
}

fn run(
    suite: Option<String>,
    instances: Vec<String>,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    json: bool,
    workers: Option<usize>,
) -> Result<bool, CliError> {
    let mut cfg = match &config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = suite {
        cfg.suite = s;
    }
    if !instances.is_empty() {
        cfg.instances = instances;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output = Some(o);
    }
    if workers == Some(0) {
        return Err(CliError::Config { field: "workers".into(), message: "must be positive".into() });
    }
    let records = otlab_cli::run(&cfg, workers)?;
    if let Some(dir) = &cfg.output {
        otlab_cli::write_outputs(dir, &records)?;
    }
    if json {
        for r in &records {
            println!("{}", r.to_json_line());
        }
    } else {
        print!("{}", otlab_cli::record::summary_table(&records));
    }
    Ok(!otlab_cli::any_failure(&records))
}
