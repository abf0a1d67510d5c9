fn main() {
    std::process::exit(ksforge::cli::run());
}
