fn main() {
    std::process::exit(rashomon::cli::main_with_args(std::env::args_os()));
}
