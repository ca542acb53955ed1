fn main() {
    std::process::exit(mdcert_cli::run(std::env::args_os()));
}
