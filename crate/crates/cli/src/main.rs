fn main() {
    std::process::exit(gschro::cli_main(std::env::args_os()));
}
