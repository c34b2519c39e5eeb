use clap::Parser;
use template_router_gateway::cli::{run, Cli};
use tracing_subscriber::filter::LevelFilter;

#[tokio::main]
async fn main() {
    let cli = Cli::parse();
    let level = cli.log_level.parse::<LevelFilter>().unwrap_or(LevelFilter::INFO);
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();
    if let Err(e) = run(cli).await {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
