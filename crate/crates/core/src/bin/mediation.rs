fn main() {
    std::process::exit(mediation::cli::run(std::env::args_os()));
}
