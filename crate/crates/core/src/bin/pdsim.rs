fn main() {
    std::process::exit(bounded_pd::cli::main_with(std::env::args_os()));
}
