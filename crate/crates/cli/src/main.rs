fn main() {
    std::process::exit(fdb_cli::run(std::env::args_os()));
}
