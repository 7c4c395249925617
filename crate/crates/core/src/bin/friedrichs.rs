fn main() {
    std::process::exit(friedrichs_core::cli::main_with_args(std::env::args_os()));
}
