fn main() {
    std::process::exit(ttx::service::cli::run_cli(std::env::args_os()));
}
