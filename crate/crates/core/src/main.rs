fn main() {
    std::process::exit(spatial_refer::cli::run(std::env::args_os()));
}
