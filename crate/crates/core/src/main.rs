fn main() {
    std::process::exit(ewsynth::cli::main_with_args(std::env::args_os()));
}
