fn main() {
    std::process::exit(mmfact_cli::run(std::env::args_os()));
}
