fn main() {
    std::process::exit(ltpss::cli::run(std::env::args_os()));
}
