fn main() {
    std::process::exit(vcnis::cli::run_from_args(std::env::args_os()));
}
