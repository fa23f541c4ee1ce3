fn main() {
    std::process::exit(fracdiff::cli::run(std::env::args_os()));
}
