fn main() {
    std::process::exit(flagsim::cli::run(std::env::args_os()));
}
