fn main() {
    std::process::exit(periporo::cli_io::cli_main(std::env::args_os()));
}
