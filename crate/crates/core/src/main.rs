fn main() {
    std::process::exit(rainbow_aps::cli::run(std::env::args_os()));
}
