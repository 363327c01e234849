fn main() {
    std::process::exit(tabreason::cli::dispatch(std::env::args_os()));
}
