fn main() {
    std::process::exit(lemon_billiards::cli::main_with_args(std::env::args_os()));
}
