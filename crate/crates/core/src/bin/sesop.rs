fn main() {
    std::process::exit(sesop::cli::run(std::env::args_os()));
}
