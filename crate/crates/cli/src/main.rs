fn main() {
    std::process::exit(stairlab_cli::run(std::env::args_os()));
}
