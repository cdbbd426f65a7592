fn main() {
    std::process::exit(nmdf::cli::run(std::env::args_os()));
}
