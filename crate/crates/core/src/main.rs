fn main() {
    std::process::exit(rosl::cli::run(std::env::args_os()));
}
