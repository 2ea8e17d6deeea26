fn main() {
    std::process::exit(csa_core::cli::run(std::env::args_os()));
}
