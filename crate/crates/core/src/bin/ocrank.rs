fn main() {
    env_logger::init();
    std::process::exit(ocrank::cli::run(std::env::args_os()));
}
