fn main() {
    std::process::exit(bcart::cli::main_entry());
}
