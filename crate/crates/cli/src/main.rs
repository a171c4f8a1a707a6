fn main() {
    std::process::exit(survcal_cli::run(std::env::args()));
}
