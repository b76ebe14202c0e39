fn main() {
    std::process::exit(marchenko::cli::main());
}
