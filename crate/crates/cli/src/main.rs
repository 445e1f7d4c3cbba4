use clap::Parser;
use descent_lab_cli::{main_with, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DESCENT_LAB_LOG", "warn"))
        .init();
    std::process::exit(main_with(Cli::parse()));
}
