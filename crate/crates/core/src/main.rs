fn main() {
    std::process::exit(cpush::cli::main_with_args(std::env::args_os()));
}
