fn main() {
    std::process::exit(qcap::cli::main_with_args(std::env::args_os()));
}
