fn main() {
    std::process::exit(dual_adapt::cli::run_command(std::env::args_os()));
}
