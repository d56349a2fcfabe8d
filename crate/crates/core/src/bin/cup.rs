use std::io::{self, BufReader};
use std::process::ExitCode;

fn main() -> ExitCode {
    match cup::cli::run(std::env::args_os(), BufReader::new(io::stdin()), io::stdout()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
