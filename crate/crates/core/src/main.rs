fn main() {
    std::process::exit(starval::cli::run(std::env::args_os()));
}
