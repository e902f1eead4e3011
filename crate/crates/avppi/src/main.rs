fn main() {
    std::process::exit(avppi::cli::run(std::env::args_os()));
}
