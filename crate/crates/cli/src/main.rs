fn main() {
    std::process::exit(twistedbad_cli::run_from(std::env::args_os()));
}
