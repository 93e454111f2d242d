fn main() {
    std::process::exit(kszk::cli::main_entry(std::env::args_os()));
}
