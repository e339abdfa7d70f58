fn main() {
    std::process::exit(diversifed::cli::cli_main(std::env::args_os()));
}
