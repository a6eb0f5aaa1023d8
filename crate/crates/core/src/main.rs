fn main() {
    std::process::exit(nonsmooth_control::harness::cli::main_with_args(std::env::args_os()));
}
