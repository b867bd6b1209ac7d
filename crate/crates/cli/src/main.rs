fn main() {
    std::process::exit(geophase_cli::run_command(std::env::args_os()));
}
