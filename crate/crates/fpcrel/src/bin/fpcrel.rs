fn main() {
    std::process::exit(fpcrel::cli::main());
}
