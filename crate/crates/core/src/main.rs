fn main() {
    std::process::exit(posd::cli::run(std::env::args_os()));
}
