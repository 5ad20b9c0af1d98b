fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(longrun::cli::run(&argv));
}
