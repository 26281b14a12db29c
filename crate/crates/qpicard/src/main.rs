use std::process::ExitCode;

fn main() -> ExitCode {
    qpicard::cli::main_entry()
}
