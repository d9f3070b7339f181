fn main() {
    std::process::exit(broadlearn::cli::run(std::env::args_os()));
}
