fn main() {
    std::process::exit(eqpt::cli::run(std::env::args_os()));
}
