fn main() {
    std::process::exit(tab_cli::main_with_args(std::env::args_os()));
}
