fn main() {
    std::process::exit(poisearch_cli::main_with_args(std::env::args_os()));
}
