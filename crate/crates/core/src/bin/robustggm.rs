fn main() {
    std::process::exit(robustggm::cli::main_with_args(std::env::args_os()));
}
