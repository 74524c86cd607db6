fn main() {
    std::process::exit(friedrichs::main_with_args(std::env::args_os()));
}
