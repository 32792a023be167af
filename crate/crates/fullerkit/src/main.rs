fn main() {
    std::process::exit(fullerkit::cli::run(std::env::args_os()));
}
