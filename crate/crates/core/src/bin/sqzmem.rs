fn main() {
    std::process::exit(sqzmem::cli::main_entry());
}
