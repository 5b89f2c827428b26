fn main() {
    std::process::exit(zeno_ksat::cli::run(std::env::args_os()));
}
