fn main() {
    std::process::exit(ddsd_cli::run(std::env::args_os().collect()));
}
