use std::process::ExitCode;

fn main() -> ExitCode {
    deepq_stepper::cli::main()
}
