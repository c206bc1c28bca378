//! Listeners: HTTP (static files and `/ws`) and the optional line-TCP port.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::serve::ListenerExt;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::watch;
use tokio::task::JoinHandle;
use tokio_util::codec::{FramedRead, FramedWrite, LinesCodec};
use tower_http::services::ServeDir;

use crate::config::ServerConfig;
use crate::conn;
use crate::game::GameContext;
use crate::library::{DirectoryError, Library};
use crate::registry::Registry;

/// Largest accepted frame; inline banks are the biggest legitimate messages.
pub const MAX_FRAME_BYTES: usize = 1 << 20;

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("directory {0}")]
    Directory(#[from] DirectoryError),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
}

#[derive(Debug)]
pub struct Shared {
    pub registry: Arc<Mutex<Registry>>,
    pub ctx: GameContext,
}

/// A server whose listeners are up.
pub struct RunningServer {
    http_addr: SocketAddr,
    tcp_addr: Option<SocketAddr>,
    shared: Arc<Shared>,
    stop: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

impl RunningServer {
    pub fn http_addr(&self) -> SocketAddr {
        self.http_addr
    }

    pub fn ws_url(&self) -> String {
        format!("ws://{}/ws", self.http_addr)
    }

    pub fn tcp_addr(&self) -> Option<SocketAddr> {
        self.tcp_addr
    }

    pub fn game_count(&self) -> usize {
        self.shared.registry.lock().expect("registry lock").len()
    }

    /// Stops accepting connections and makes one more attempt at any report
    /// that could not be written earlier.
    pub async fn shutdown(self) {
        let _ = self.stop.send(true);
        for task in self.tasks {
            let _ = tokio::time::timeout(Duration::from_secs(5), task).await;
        }
        let unsaved = std::mem::take(&mut *self.shared.ctx.unsaved_reports.lock().expect("report lock"));
        for (code, report) in unsaved {
            match self.shared.ctx.library.persist_report(&code, &report) {
                Ok(path) => tracing::info!(game = %code, path = %path.display(), "report written at shutdown"),
                Err(e) => tracing::error!(game = %code, error = %e, "report lost"),
            }
        }
    }
}

/// Checks directories, binds every listener and starts serving.
pub async fn bind(config: ServerConfig) -> Result<RunningServer, StartupError> {
    let library = Library::open(&config.banks, &config.maps, &config.reports)?;
    let registry = Arc::new(Mutex::new(Registry::new(config.max_games as usize)));
    let shared = Arc::new(Shared {
        registry: registry.clone(),
        ctx: GameContext {
            library: Arc::new(library),
            registry,
            unsaved_reports: Arc::default(),
            idle_timeout: Duration::from_millis(config.idle_timeout_ms),
        },
    });
    let (stop, stopped) = watch::channel(false);

    let http =
        TcpListener::bind(config.listen).await.map_err(|source| StartupError::Bind { addr: config.listen, source })?;
    let http_addr = http.local_addr().map_err(|source| StartupError::Bind { addr: config.listen, source })?;
    let app = Router::new()
        .route("/ws", get(upgrade))
        .fallback_service(ServeDir::new(&config.web_root))
        .with_state(shared.clone());
    let mut http_stop = stopped.clone();
    let mut tasks = vec![tokio::spawn(async move {
        // Small frames should not wait on Nagle.
        let http = http.tap_io(|tcp| {
            let _ = tcp.set_nodelay(true);
        });
        let served = axum::serve(http, app).with_graceful_shutdown(async move {
            let _ = http_stop.wait_for(|s| *s).await;
        });
        if let Err(e) = served.await {
            tracing::error!(error = %e, "http listener failed");
        }
    })];

    let mut tcp_addr = None;
    if let Some(port) = config.bot_tcp_port {
        let addr = SocketAddr::new(config.listen.ip(), port);
        let listener = TcpListener::bind(addr).await.map_err(|source| StartupError::Bind { addr, source })?;
        tcp_addr = Some(listener.local_addr().map_err(|source| StartupError::Bind { addr, source })?);
        tasks.push(tokio::spawn(accept_tcp(listener, shared.clone(), stopped.clone())));
    }
    tracing::info!(%http_addr, ?tcp_addr, "listening");
    Ok(RunningServer { http_addr, tcp_addr, shared, stop, tasks })
}

/// Runs until Ctrl-C.
pub async fn run_server(config: ServerConfig) -> Result<(), StartupError> {
    let server = bind(config).await?;
    let _ = tokio::signal::ctrl_c().await;
    tracing::info!("shutting down");
    server.shutdown().await;
    Ok(())
}

async fn upgrade(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> Response {
    ws.max_message_size(MAX_FRAME_BYTES).on_upgrade(move |socket| serve_ws(shared, socket))
}

async fn serve_ws(shared: Arc<Shared>, socket: WebSocket) {
    let (sink, stream) = socket.split();
    let frames = stream
        .take_while(|m| futures::future::ready(matches!(m, Ok(m) if !matches!(m, Message::Close(_)))))
        .filter_map(|m| {
            futures::future::ready(match m {
                Ok(Message::Text(text)) => Some(text.as_bytes().to_vec()),
                Ok(Message::Binary(bytes)) => Some(bytes.to_vec()),
                _ => None,
            })
        });
    let sink = sink.with(|text: String| futures::future::ready(Ok::<_, axum::Error>(Message::Text(text.into()))));
    conn::serve(shared, Box::pin(frames), Box::pin(sink)).await;
}

async fn accept_tcp(listener: TcpListener, shared: Arc<Shared>, mut stopped: watch::Receiver<bool>) {
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    tracing::debug!(%peer, "tcp client");
                    tokio::spawn(serve_tcp(shared.clone(), stream));
                }
                Err(e) => tracing::warn!(error = %e, "tcp accept failed"),
            },
            _ = stopped.wait_for(|s| *s) => break,
        }
    }
}

async fn serve_tcp(shared: Arc<Shared>, stream: TcpStream) {
    let _ = stream.set_nodelay(true);
    let (read, write) = stream.into_split();
    let frames = FramedRead::new(read, LinesCodec::new_with_max_length(MAX_FRAME_BYTES))
        .take_while(|line| futures::future::ready(line.is_ok()))
        .filter_map(|line| futures::future::ready(line.ok().map(String::into_bytes)));
    let sink = FramedWrite::new(write, LinesCodec::new());
    conn::serve(shared, Box::pin(frames), sink).await;
}
