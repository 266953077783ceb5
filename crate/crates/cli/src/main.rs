fn main() {
    std::process::exit(fedbatch_cli::run_cli(std::env::args_os()));
}
