fn main() {
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = astm::cli::run(std::env::args_os(), &mut stdout) {
        eprintln!("astm: {e}");
        std::process::exit(e.exit_code());
    }
}
