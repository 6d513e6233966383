fn main() {
    std::process::exit(pmc_cli::main_exit_code());
}
