fn main() {
    std::process::exit(hsunmix::cli::run_cli(std::env::args_os()));
}
