fn main() {
    std::process::exit(gridflow_cli::main_with_args(std::env::args_os()));
}
