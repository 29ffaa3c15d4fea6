mod args;
mod commands;
mod config;
mod error;

use std::io::Write;
use std::process::ExitCode;

use clap::error::{ContextKind, ContextValue};
use clap::Parser;
use gpi_core::Execution;

use args::Cli;
use commands::{Context, Output};
use config::Settings;
use error::CliError;

fn print_json(v: &serde_json::Value) {
    let mut out = std::io::stdout().lock();
    let _ = serde_json::to_writer_pretty(&mut out, v);
    let _ = writeln!(out);
}

fn execute(cli: Cli) -> Result<Output, CliError> {
    let mut settings = Settings::load(cli.config.as_deref())?;
    if let Some(w) = cli.workers {
        settings.workers = Some(w);
    }
    let execution = match settings.workers {
        Some(0) => return Err(CliError::usage("--workers must be at least 1").at("--workers")),
        Some(1) => Execution::Sequential,
        _ => Execution::Parallel,
    };
    #[cfg(feature = "parallel")]
    if let Some(w) = settings.workers.filter(|&w| w > 1) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")).at("--workers"))?;
    }
    commands::run(cli.command, &Context { settings, execution })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let message = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            let mut err = CliError::usage(message.trim_start_matches("error: "));
            if let Some(ContextValue::String(arg)) = e.get(ContextKind::InvalidArg) {
                err = err.at(arg.split_whitespace().next().unwrap_or(arg));
            } else if let Some(ContextValue::Strings(args)) = e.get(ContextKind::InvalidArg) {
                if let Some(arg) = args.first() {
                    err = err.at(arg.split_whitespace().next().unwrap_or(arg));
                }
            }
            print_json(&err.to_json());
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(Output::Json(v)) => {
            print_json(&v);
            ExitCode::SUCCESS
        }
        Ok(Output::Failed(v)) => {
            print_json(&v);
            ExitCode::from(3)
        }
        Ok(Output::Text(t)) => {
            print!("{t}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            print_json(&e.to_json());
            ExitCode::from(2)
        }
    }
}
