fn main() {
    std::process::exit(ecolane::cli::main_with_args(std::env::args_os()));
}
