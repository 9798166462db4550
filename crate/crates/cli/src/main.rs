fn main() {
    std::process::exit(pssr_cli::run(std::env::args_os()));
}
