fn main() {
    std::process::exit(ris_coverage::cli::run(std::env::args_os()));
}
