fn main() {
    std::process::exit(kernelfuse::cli::main_with_args(std::env::args_os()));
}
