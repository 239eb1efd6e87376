fn main() {
    std::process::exit(horizon::cli::run(std::env::args_os()));
}
