fn main() {
    std::process::exit(garding_eigen::cli::dispatch(std::env::args()));
}
