use std::process::ExitCode;

fn main() -> ExitCode {
    p4gen::cli::main()
}
