fn main() {
    std::process::exit(imt_cli::run(std::env::args_os()));
}
