use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use earmark_server::{serve, ServerConfig};

/// Sighting registry and match review API.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides `bind` from the config.
    #[arg(long)]
    bind: Option<std::net::SocketAddr>,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let args = Args::parse();
    let mut config = match &args.config {
        Some(path) => match ServerConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("earmark-server: {e}");
                return ExitCode::FAILURE;
            }
        },
        None => ServerConfig::default(),
    };
    if let Some(bind) = args.bind {
        config.bind = bind;
    }
    if config.users.is_empty() {
        tracing::warn!("no users configured; every authenticated route will answer 401");
    }
    let server = match serve(config).await {
        Ok(s) => s,
        Err(e) => {
            eprintln!("earmark-server: {e}");
            return ExitCode::FAILURE;
        }
    };
    tokio::select! {
        r = server.wait() => {
            if let Err(e) = r {
                eprintln!("earmark-server: {e}");
                return ExitCode::FAILURE;
            }
        }
        _ = tokio::signal::ctrl_c() => tracing::info!("shutting down"),
    }
    ExitCode::SUCCESS
}
