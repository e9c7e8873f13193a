fn main() {
    std::process::exit(motiontext::cli_main());
}
