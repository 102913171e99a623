fn main() {
    std::process::exit(pinvar::cli::run(std::env::args_os()));
}
