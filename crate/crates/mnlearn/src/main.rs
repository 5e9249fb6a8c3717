fn main() {
    std::process::exit(mnlearn::cli::main_with_args(std::env::args_os()));
}
