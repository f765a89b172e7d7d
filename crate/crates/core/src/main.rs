fn main() {
    std::process::exit(linkabs::cli::main_entry(std::env::args_os()));
}
