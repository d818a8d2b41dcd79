fn main() {
    std::process::exit(bayesim::cli::run(std::env::args_os()));
}
