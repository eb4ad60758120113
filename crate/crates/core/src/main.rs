use std::io::Write;
use std::process::ExitCode;

use atc_core::cli::{run, Cli, EXIT_INPUT};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = match run(cli, &mut out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    };
    let _ = out.flush();
    ExitCode::from(code as u8)
}
