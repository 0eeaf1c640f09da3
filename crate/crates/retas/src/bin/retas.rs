use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(retas::cli::run() as u8)
}
