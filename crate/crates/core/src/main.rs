fn main() {
    std::process::exit(accelcd::cli::main_with_args(std::env::args_os()));
}
