fn main() {
    std::process::exit(pfdr::cli::run(std::env::args_os()));
}
