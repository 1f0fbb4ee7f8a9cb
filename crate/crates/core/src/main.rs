use std::process::ExitCode;

use clap::Parser;
use mathcurate::cli::{resolve_config, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = resolve_config(&cli)
        .map(|c| c.log_level)
        .unwrap_or_else(|_| "info".into());
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match run(cli) {
        Ok(summaries) => {
            for s in summaries {
                eprintln!("{s}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
