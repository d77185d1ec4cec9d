use std::process::ExitCode;

fn main() -> ExitCode {
    richop::cli::main_with_args(std::env::args_os())
}
