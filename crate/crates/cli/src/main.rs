fn main() {
    std::process::exit(carpetlab_cli::run(std::env::args_os()));
}
