use std::process::ExitCode;

fn main() -> ExitCode {
    landauer_fcs::cli::run_from_args(std::env::args_os())
}
