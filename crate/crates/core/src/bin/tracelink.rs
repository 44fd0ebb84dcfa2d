fn main() {
    std::process::exit(tracelink::interface::cli::run(std::env::args_os()));
}
