fn main() {
    std::process::exit(anosov_lab::main_with_args(std::env::args_os()));
}
