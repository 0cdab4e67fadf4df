fn main() {
    std::process::exit(doconto::cli::run(std::env::args_os()));
}
