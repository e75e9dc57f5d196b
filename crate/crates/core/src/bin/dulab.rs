fn main() {
    std::process::exit(duvae::cli::run(std::env::args_os()));
}
