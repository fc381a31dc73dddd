fn main() {
    std::process::exit(edgewave::cli::main_with_args(std::env::args_os()));
}
