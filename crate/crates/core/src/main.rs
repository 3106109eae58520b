fn main() {
    std::process::exit(hele_homog::cli::dispatch(std::env::args_os()));
}
