//! HTTP/SSE gateway around the prepaid meter simulator.

pub mod api;
pub mod config;
pub mod error;
pub mod events;
pub mod session;

use std::net::SocketAddr;

use tokio::net::TcpListener;
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;

pub use config::{GatewayConfig, Pacing};

/// A running gateway: the meter session plus its HTTP server.
pub struct Gateway {
    addr: SocketAddr,
    shutdown: watch::Sender<bool>,
    session: JoinHandle<()>,
    server: JoinHandle<std::io::Result<()>>,
}

impl Gateway {
    /// Restores state from `config.data_dir` and starts serving on `bind`.
    /// Port 0 picks a free port; see [`Gateway::addr`].
    pub async fn start(config: &GatewayConfig, bind: SocketAddr) -> anyhow::Result<Self> {
        let (session, hub, view) = session::Session::open(config)?;
        let listener = TcpListener::bind(bind).await?;
        let addr = listener.local_addr()?;

        let (shutdown, shutdown_rx) = watch::channel(false);
        let (cmd_tx, cmd_rx) = mpsc::channel(64);
        let session = tokio::spawn(session.run(cmd_rx, shutdown_rx.clone()));

        let app = api::router(api::AppState { commands: cmd_tx, view, hub, shutdown: shutdown_rx.clone() });
        let mut stop = shutdown_rx;
        let server = tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async move {
                    let _ = stop.wait_for(|s| *s).await;
                })
                .await
        });
        tracing::info!(%addr, "gateway listening");
        Ok(Gateway { addr, shutdown, session, server })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops the session and the server and waits for both.
    pub async fn shutdown(self) -> anyhow::Result<()> {
        self.shutdown.send_replace(true);
        self.wait().await
    }

    /// Waits until the gateway stops.
    pub async fn wait(self) -> anyhow::Result<()> {
        self.session.await?;
        self.server.await??;
        Ok(())
    }

    /// A handle that can trigger shutdown from elsewhere, e.g. a signal handler.
    pub fn stopper(&self) -> watch::Sender<bool> {
        self.shutdown.clone()
    }
}
