fn main() {
    std::process::exit(semg_tokens::cli::main());
}
