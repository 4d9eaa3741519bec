fn main() {
    std::process::exit(pretext_eval::cli::cli_main(std::env::args_os()));
}
