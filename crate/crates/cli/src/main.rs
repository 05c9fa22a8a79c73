fn main() {
    std::process::exit(spoofsense_cli::run(std::env::args_os()));
}
