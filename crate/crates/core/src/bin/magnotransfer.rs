fn main() {
    std::process::exit(magnotransfer_core::cli::main());
}
