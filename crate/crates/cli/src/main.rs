use std::io::{IsTerminal, Write};
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use presence_cli::args::{Cli, Command};
use presence_cli::commands;
use presence_cli::server::{serve, AppState};
use presence_core::store::Store;
use presence_core::Result;
use tracing_subscriber::EnvFilter;

fn run(cli: Cli) -> Result<Option<String>> {
    let config = commands::load_config(cli.config.as_deref())?;
    if let Command::Simulate(a) = &cli.command {
        return commands::simulate(a).map(Some);
    }
    let store = Store::open(&cli.store)?;
    let out = match &cli.command {
        Command::Ingest(a) => commands::ingest(&store, a)?,
        Command::Coalesce(a) => commands::coalesce(&store, &config, a)?,
        Command::AnnotateForm(a) => commands::annotate_form(&store, &config, a)?,
        Command::Train(a) => commands::train(&store, &config, a)?,
        Command::Forecast(a) => commands::forecast(&store, config, a)?,
        Command::Eci(a) => commands::eci(&store, config, a)?,
        Command::Evaluate(a) => commands::evaluate(&store, config, a)?,
        Command::Simulate(_) => unreachable!("handled above"),
        Command::Serve(a) => {
            let state = Arc::new(AppState::load(cli.store.clone(), config)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(state, &a.addr))?;
            return Ok(None);
        }
    };
    Ok(Some(out))
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("PRESENCE_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Some(out)) => {
            if !out.is_empty() {
                let _ = writeln!(std::io::stdout().lock(), "{}", out.trim_end_matches('\n'));
            }
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
