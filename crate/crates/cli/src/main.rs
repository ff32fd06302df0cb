fn main() {
    std::process::exit(ashgan_cli::run(std::env::args_os()));
}
