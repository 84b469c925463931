fn main() {
    std::process::exit(catgrad::cli::main_with_args(std::env::args_os()));
}
