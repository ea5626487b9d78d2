use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ndmlnr::cli::main_with(std::env::args_os()))
}
