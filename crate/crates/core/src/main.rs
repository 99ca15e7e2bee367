fn main() {
    std::process::exit(polsim::cli::main_with_args(std::env::args_os()));
}
