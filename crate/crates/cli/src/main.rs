fn main() {
    if let Err(e) = tenseg_cli::run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
