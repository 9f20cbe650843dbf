fn main() {
    std::process::exit(gibbs_rates::cli::run(std::env::args_os()));
}
