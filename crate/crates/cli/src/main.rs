fn main() {
    std::process::exit(skewmsv_cli::run(std::env::args_os()));
}
