fn main() {
    std::process::exit(glovepose::cli::main_with_args(std::env::args_os()));
}
