use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(fracops::cli::cli_main(std::env::args()) as u8)
}
