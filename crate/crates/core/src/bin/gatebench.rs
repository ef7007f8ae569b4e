fn main() {
    std::process::exit(gatebench::cli::run(std::env::args_os()));
}
