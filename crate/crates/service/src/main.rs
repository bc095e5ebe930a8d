fn main() {
    std::process::exit(corpusmap_service::cli::run(std::env::args_os()));
}
