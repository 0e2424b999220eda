fn main() {
    std::process::exit(ctxparse::cli::main_with_args(std::env::args_os()));
}
