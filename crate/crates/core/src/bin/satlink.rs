fn main() {
    std::process::exit(satlink::cli::main());
}
