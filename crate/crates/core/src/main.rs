fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let status = grulstm::cli::run(std::env::args_os(), std::env::var("GRULSTM_SEED").ok());
    std::process::exit(status);
}
