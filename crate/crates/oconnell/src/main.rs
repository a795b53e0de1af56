fn main() {
    std::process::exit(oconnell::cli::run(std::env::args_os()));
}
