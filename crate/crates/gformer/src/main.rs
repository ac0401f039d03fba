fn main() {
    std::process::exit(gformer::cli::main_with_exit_codes());
}
