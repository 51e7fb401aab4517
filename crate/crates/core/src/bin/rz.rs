fn main() {
    std::process::exit(rzones::cli::main_with_args(std::env::args_os()));
}
