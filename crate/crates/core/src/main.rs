fn main() {
    std::process::exit(doptk::cli::main_with_args(std::env::args_os()));
}
