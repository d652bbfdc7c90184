fn main() {
    std::process::exit(refgame::cli::main_with_args(std::env::args_os()));
}
