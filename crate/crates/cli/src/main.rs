use std::process::ExitCode;

fn main() -> ExitCode {
    ghostfield_cli::run_from_args(std::env::args_os())
}
