fn main() {
    std::process::exit(freqfusion::cli::run(std::env::args_os()));
}
