fn main() {
    std::process::exit(paradigm::cli::main());
}
