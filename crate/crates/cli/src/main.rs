use std::process::ExitCode;

use clap::Parser;
use hcrf_opinion_cli::cli::{run, Cli};
use hcrf_opinion_cli::logging;

fn main() -> ExitCode {
    logging::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            log::logger().flush();
            ExitCode::FAILURE
        }
    }
}
