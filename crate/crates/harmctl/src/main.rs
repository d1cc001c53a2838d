fn main() {
    std::process::exit(harmctl::cli::run());
}
