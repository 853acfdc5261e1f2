fn main() {
    std::process::exit(ns_stability::main_with(std::env::args_os(), std::env::vars()));
}
