fn main() {
    std::process::exit(wpbc::cli::main_with_args(std::env::args_os()));
}
