fn main() {
    std::process::exit(daugavet::cli::main_with_args(std::env::args_os()));
}
