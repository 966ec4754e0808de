fn main() {
    std::process::exit(singseries_cli::run_main(std::env::args_os()));
}
