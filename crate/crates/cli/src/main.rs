fn main() {
    std::process::exit(fbm_sfde_cli::main_with(std::env::args_os()));
}
