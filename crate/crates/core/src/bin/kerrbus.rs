fn main() -> std::process::ExitCode {
    kerrbus::runner::main_with_args(std::env::args_os())
}
