fn main() {
    std::process::exit(bfrb_cli::run_cli(std::env::args_os()));
}
