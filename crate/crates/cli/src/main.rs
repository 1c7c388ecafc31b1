fn main() {
    std::process::exit(zaps_cli::main_with(std::env::args_os()));
}
