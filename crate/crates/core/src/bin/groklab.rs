fn main() {
    std::process::exit(groklab::expcli::cli::main_with_args(std::env::args_os()));
}
