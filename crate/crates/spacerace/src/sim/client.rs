//! A protocol client over WebSocket or newline-delimited TCP.

use std::pin::Pin;

use futures::{Sink, SinkExt, Stream, StreamExt};
use spacerace_core::protocol::{decode_message, encode_message_string, Payload, WireMessage};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_util::codec::{FramedRead, FramedWrite, LinesCodec};

use super::SimError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ServerAddr {
    /// Full URL, e.g. `ws://127.0.0.1:8080/ws`.
    WebSocket(String),
    /// `host:port` of the line-TCP bot port.
    Tcp(String),
}

impl std::str::FromStr for ServerAddr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.starts_with("ws://") || s.starts_with("wss://") {
            Ok(ServerAddr::WebSocket(s.into()))
        } else if let Some(rest) = s.strip_prefix("tcp://") {
            Ok(ServerAddr::Tcp(rest.into()))
        } else {
            Err(format!("expected ws://host:port/ws or tcp://host:port, got {s:?}"))
        }
    }
}

impl std::fmt::Display for ServerAddr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ServerAddr::WebSocket(url) => f.write_str(url),
            ServerAddr::Tcp(addr) => write!(f, "tcp://{addr}"),
        }
    }
}

type Frames = Pin<Box<dyn Stream<Item = Result<String, String>> + Send>>;
type Writer = Pin<Box<dyn Sink<String, Error = String> + Send>>;

pub struct Client {
    frames: Frames,
    writer: Writer,
    seq: u64,
    last_server_seq: u64,
    pub sent: u64,
    pub received: u64,
    transcript: Option<Vec<String>>,
}

impl Client {
    pub async fn connect(addr: &ServerAddr) -> Result<Self, SimError> {
        let fail = |e: String| SimError::ConnectFailure { addr: addr.to_string(), reason: e };
        let (frames, writer): (Frames, Writer) = match addr {
            ServerAddr::WebSocket(url) => {
                let (ws, _) = tokio_tungstenite::connect_async_with_config(url.as_str(), None, true)
                    .await
                    .map_err(|e| fail(e.to_string()))?;
                let (sink, stream) = ws.split();
                let frames = stream.filter_map(|m| async move {
                    match m {
                        Ok(Message::Text(t)) => Some(Ok(t.as_str().to_owned())),
                        Ok(Message::Binary(b)) => Some(String::from_utf8(b.to_vec()).map_err(|e| e.to_string())),
                        Ok(Message::Close(_)) => None,
                        Ok(_) => None,
                        Err(e) => Some(Err(e.to_string())),
                    }
                });
                let writer = sink
                    .sink_map_err(|e| e.to_string())
                    .with(|t: String| async move { Ok::<_, String>(Message::Text(t.into())) });
                (Box::pin(frames), Box::pin(writer))
            }
            ServerAddr::Tcp(host) => {
                let stream = TcpStream::connect(host.as_str()).await.map_err(|e| fail(e.to_string()))?;
                stream.set_nodelay(true).map_err(|e| fail(e.to_string()))?;
                let (read, write) = stream.into_split();
                let frames = FramedRead::new(read, LinesCodec::new()).map(|r| r.map_err(|e| e.to_string()));
                let writer =
                    SinkExt::<String>::sink_map_err(FramedWrite::new(write, LinesCodec::new()), |e| e.to_string());
                (Box::pin(frames), Box::pin(writer))
            }
        };
        Ok(Self { frames, writer, seq: 0, last_server_seq: 0, sent: 0, received: 0, transcript: None })
    }

    /// Keeps every raw frame received from now on.
    pub fn keep_transcript(&mut self) {
        self.transcript.get_or_insert_with(Vec::new);
    }

    pub fn transcript(&self) -> &[String] {
        self.transcript.as_deref().unwrap_or_default()
    }

    pub async fn send(&mut self, payload: impl Into<Payload>) -> Result<(), SimError> {
        self.seq += 1;
        let text = encode_message_string(&WireMessage::new(self.seq, payload));
        self.writer.send(text).await.map_err(SimError::Transport)?;
        self.sent += 1;
        Ok(())
    }

    /// Sends raw text as one frame, bypassing the encoder.
    pub async fn send_raw(&mut self, text: impl Into<String>) -> Result<(), SimError> {
        self.writer.send(text.into()).await.map_err(SimError::Transport)
    }

    /// Next message, or `None` once the server closed the connection. Server
    /// `seq` must count up by one per message.
    pub async fn recv(&mut self) -> Result<Option<WireMessage>, SimError> {
        let Some(frame) = self.frames.next().await else { return Ok(None) };
        let frame = frame.map_err(SimError::Transport)?;
        if let Some(kept) = &mut self.transcript {
            kept.push(frame.clone());
        }
        let message = decode_message(frame.as_bytes())
            .map_err(|e| SimError::Protocol(format!("undecodable server frame ({e}): {frame}")))?;
        if message.seq != self.last_server_seq + 1 {
            return Err(SimError::Protocol(format!(
                "server seq jumped from {} to {}",
                self.last_server_seq, message.seq
            )));
        }
        self.last_server_seq = message.seq;
        self.received += 1;
        Ok(Some(message))
    }

    pub async fn close(mut self) {
        let _ = self.writer.close().await;
    }
}
