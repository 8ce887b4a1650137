use std::process::ExitCode;

fn main() -> ExitCode {
    deepfi::cli::run()
}
