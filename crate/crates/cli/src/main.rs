fn main() {
    std::process::exit(gsmatrix_cli::run(std::env::args_os()));
}
