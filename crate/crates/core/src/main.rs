fn main() {
    std::process::exit(repri::cli::run(std::env::args_os()));
}
