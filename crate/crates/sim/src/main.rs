fn main() {
    std::process::exit(qrouting::cli::run(std::env::args_os()));
}
