use std::process::ExitCode;

fn main() -> ExitCode {
    gauss_lab::cli::main_entry()
}
