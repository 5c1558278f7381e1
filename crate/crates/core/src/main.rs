fn main() {
    std::process::exit(sparse_shortener::exp_harness::cli_main(std::env::args_os()));
}
