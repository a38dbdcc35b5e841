fn main() {
    std::process::exit(spectroemg::cli::run(std::env::args_os()));
}
