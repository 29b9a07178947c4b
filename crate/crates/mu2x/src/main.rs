fn main() {
    std::process::exit(mu2x::cli::run(std::env::args_os()));
}
