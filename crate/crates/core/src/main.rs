fn main() {
    std::process::exit(fks::cli::cli_main(std::env::args_os()));
}
