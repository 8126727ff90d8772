fn main() {
    std::process::exit(gl3lab_cli::run(std::env::args()));
}
