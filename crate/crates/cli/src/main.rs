fn main() {
    let seed = std::env::var(crdrn_cli::SEED_ENV).ok();
    std::process::exit(crdrn_cli::main_with(std::env::args_os(), seed.as_deref()));
}
