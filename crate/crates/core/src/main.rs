fn main() {
    std::process::exit(nodalfrac::cli::run_from(std::env::args_os()));
}
