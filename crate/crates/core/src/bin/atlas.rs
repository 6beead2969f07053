fn main() {
    std::process::exit(atlas_core::cli::main_from_args(std::env::args_os()));
}
