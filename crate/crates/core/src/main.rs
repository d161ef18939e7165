fn main() {
    std::process::exit(gatelab::cli::run());
}
