use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = earmark_cli::Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match earmark_cli::run(&cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("earmark: {e}");
            ExitCode::FAILURE
        }
    }
}
