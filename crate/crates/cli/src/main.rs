fn main() {
    std::process::exit(sdelab_cli::main_with_args(std::env::args_os()));
}
