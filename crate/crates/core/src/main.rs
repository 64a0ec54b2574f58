fn main() {
    std::process::exit(zdtoric::cli::main_with_args(std::env::args_os()));
}
