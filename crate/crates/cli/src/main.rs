fn main() {
    std::process::exit(magnhom_cli::run(std::env::args_os()));
}
