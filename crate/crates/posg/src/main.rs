use std::process::ExitCode;

fn main() -> ExitCode {
    posg::cli::main()
}
