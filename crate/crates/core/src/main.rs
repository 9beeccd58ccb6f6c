fn main() {
    std::process::exit(robust_mean::cli::run(std::env::args_os()));
}
