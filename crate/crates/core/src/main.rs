use claimmatch::runner::cli::{execute, Cli};
use clap::Parser;

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = execute(cli.command).await {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
