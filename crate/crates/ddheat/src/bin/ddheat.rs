use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ddheat::cli::run(std::env::args()) as u8)
}
