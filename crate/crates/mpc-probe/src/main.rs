use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mpc_probe::cli::dispatch(std::env::args()) as u8)
}
