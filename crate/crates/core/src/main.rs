fn main() {
    std::process::exit(cpc::cli::main_entry());
}
