use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(l1tikhonov::cli::run(std::env::args_os()))
}
