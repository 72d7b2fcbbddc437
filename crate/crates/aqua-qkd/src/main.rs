use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use aqua_qkd::io::write_output;
use aqua_qkd::{run_scenario, AppError, ExperimentConfig, OutputFormat, Scenario};
use clap::Parser;

/// Underwater BB84 QKD experiments.
#[derive(Debug, Parser)]
#[command(name = "aqua-qkd", version)]
struct Cli {
    scenario: Scenario,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when neither this nor `output_path` is set.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

fn run(cli: Cli) -> Result<(), AppError> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let report = run_scenario(cli.scenario, &cfg)?;
    let format = cli.format.or(cfg.output_format).unwrap_or_else(|| report.default_format());
    let text = report.render(format)?;
    match cli.out.or(cfg.output_path) {
        Some(path) => write_output(&path, &text),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| AppError::io("<stdout>", e)),
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aqua-qkd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
