use clap::Parser;

use amorph_service::{router, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "amorph-serve", version, about = "HTTP service for attentive makeup morphing")]
struct Args {
    #[arg(long, env = "AMORPH_BIND", default_value = "127.0.0.1")]
    bind: String,
    #[arg(long, env = "AMORPH_PORT", default_value_t = 8080)]
    port: u16,
    /// Prepared faces kept in the cache.
    #[arg(long, env = "AMORPH_CACHE_SIZE", default_value_t = 32)]
    cache_size: usize,
    /// Largest working grid a request may ask for.
    #[arg(long, env = "AMORPH_GRID_CAP", default_value_t = 128)]
    grid_cap: usize,
    /// Request body limit in bytes.
    #[arg(long, env = "AMORPH_MAX_BODY", default_value_t = 16 * 1024 * 1024)]
    max_body: usize,
    /// Allowed CORS origin (any when unset).
    #[arg(long, env = "AMORPH_CORS_ORIGIN")]
    cors_origin: Option<String>,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let config = ServiceConfig {
        max_body_bytes: args.max_body,
        grid_cap: args.grid_cap,
        cache_capacity: args.cache_size,
        cors_origin: args.cors_origin,
    };
    let listener = tokio::net::TcpListener::bind((args.bind.as_str(), args.port)).await?;
    eprintln!("amorph-serve listening on {}", listener.local_addr()?);
    axum::serve(listener, router(config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
