fn main() {
    std::process::exit(citekit::cli::run());
}
