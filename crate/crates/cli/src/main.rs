fn main() {
    let env_output = std::env::var(homopolymer_cli::OUTPUT_DIR_ENV).ok();
    std::process::exit(homopolymer_cli::main_with(std::env::args_os(), env_output.as_deref()));
}
