fn main() {
    std::process::exit(qcb_cli::run(std::env::args()));
}
