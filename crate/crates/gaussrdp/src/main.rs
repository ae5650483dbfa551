use std::process::ExitCode;

fn main() -> ExitCode {
    gaussrdp::cli::main_with_args(std::env::args_os())
}
