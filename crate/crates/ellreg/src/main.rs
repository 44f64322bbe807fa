use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ellreg::cli::run(std::env::args()) as u8)
}
