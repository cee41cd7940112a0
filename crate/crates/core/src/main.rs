fn main() {
    std::process::exit(ontic::cli::main_with_args(std::env::args_os()));
}
