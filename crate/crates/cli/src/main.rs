fn main() {
    std::process::exit(lcp_lab::run(std::env::args_os()));
}
