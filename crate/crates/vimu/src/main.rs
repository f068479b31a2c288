use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(vimu::cli::run(std::env::args_os()))
}
