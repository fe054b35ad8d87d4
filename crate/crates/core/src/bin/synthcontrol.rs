fn main() {
    std::process::exit(synthcontrol::cli::run(std::env::args_os()));
}
