fn main() {
    std::process::exit(glrm::cli::run(std::env::args_os()));
}
