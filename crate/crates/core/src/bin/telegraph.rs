fn main() {
    std::process::exit(telegraph::cli::run(std::env::args_os()));
}
