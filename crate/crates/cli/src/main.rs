fn main() {
    std::process::exit(forestmfg_cli::run(std::env::args_os()));
}
