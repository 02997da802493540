fn main() {
    std::process::exit(cpulse::cli::main_with(std::env::args_os()));
}
