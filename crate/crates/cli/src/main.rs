fn main() {
    std::process::exit(pmkit_cli::run(std::env::args_os()));
}
