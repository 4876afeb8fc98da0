fn main() {
    std::process::exit(amorph_cli::run(std::env::args_os()));
}
