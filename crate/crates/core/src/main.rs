fn main() -> std::process::ExitCode {
    mixedpath::cli::main_with_args(std::env::args_os())
}
