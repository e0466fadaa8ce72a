fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MMPD_LOG", "info")).init();
    std::process::exit(mmpd_core::cli::run(std::env::args_os()));
}
