fn main() {
    std::process::exit(cswx::cli::run(std::env::args_os()));
}
