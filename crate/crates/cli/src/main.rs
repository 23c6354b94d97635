fn main() {
    std::process::exit(depkit_cli::run(std::env::args_os()));
}
