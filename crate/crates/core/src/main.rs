fn main() {
    std::process::exit(psfnet::cli::run(std::env::args_os()));
}
