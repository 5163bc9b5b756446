use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(fpva::cli::run())
}
