fn main() {
    std::process::exit(dpnav_cli::main());
}
