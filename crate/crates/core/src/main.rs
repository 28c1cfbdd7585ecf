fn main() {
    std::process::exit(dea_tobit::cli::run(std::env::args_os()));
}
