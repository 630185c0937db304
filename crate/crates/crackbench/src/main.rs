fn main() {
    std::process::exit(crackbench::cli::run(std::env::args_os()));
}
