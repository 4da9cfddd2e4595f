fn main() {
    std::process::exit(ptc_core::cli::run(std::env::args_os()));
}
