fn main() {
    let mut out = std::io::stdout();
    if let Err(e) = gpa_plan::cli::run(std::env::args(), &mut out) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
