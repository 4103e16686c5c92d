fn main() {
    plrnn_ct::cli::init_logging();
    std::process::exit(plrnn_ct::cli::run(std::env::args_os()));
}
