fn main() {
    std::process::exit(edgenet::cli::main_with_args(std::env::args_os()));
}
