//! Per-connection protocol handling, independent of the transport.
//!
//! The reader decodes frames, checks session legality and forwards inputs to
//! the owning game. A separate writer drains the connection's outbound queue
//! and stamps each message with the server-side `seq`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use futures::{Sink, SinkExt, Stream, StreamExt};
use rand::rngs::OsRng;
use spacerace_core::engine::GameConfig;
use spacerace_core::protocol::{
    decode_message, encode_message_string, AdminCreateGame, ErrorMsg, GameCreated, Legality, Payload, Session,
    SessionRole, WireMessage,
};
use spacerace_core::question::QuestionBank;
use spacerace_core::GameState;
use tokio::sync::{mpsc, oneshot};

use crate::game::{error_msg, spawn_game, ConnId, GameCommand, Outbound, ToClient};
use crate::library::{LibraryError, DEFAULT_MAP};
use crate::registry::{new_secret, CapacityReached, GameHandle};
use crate::server::Shared;

static NEXT_CONN: AtomicU64 = AtomicU64::new(1);

/// Why a request from an unbound session could not be served.
#[derive(Debug, thiserror::Error)]
pub enum RequestError {
    #[error(transparent)]
    Capacity(#[from] CapacityReached),
    #[error("no game with code {0:?}")]
    GameNotFound(String),
    #[error("wrong admin token for game {0:?}")]
    BadToken(String),
    #[error("either bankName or bank is required")]
    BankMissing,
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Engine(#[from] spacerace_core::EngineError),
    #[error("the game has closed")]
    GameClosed,
}

impl RequestError {
    pub fn code(&self) -> &'static str {
        match self {
            RequestError::Capacity(_) => "capacity_reached",
            RequestError::GameNotFound(_) => "game_not_found",
            RequestError::BadToken(_) => "credentials",
            RequestError::BankMissing => "bank_missing",
            RequestError::Library(LibraryError::BankNotFound(_)) => "bank_not_found",
            RequestError::Library(LibraryError::MapNotFound(_)) => "map_not_found",
            RequestError::Library(LibraryError::InvalidName(_)) => "invalid_name",
            RequestError::Library(LibraryError::Bank { .. }) => "invalid_bank",
            RequestError::Library(LibraryError::Map { .. }) => "invalid_map",
            RequestError::Library(LibraryError::Io { .. }) => "io_failure",
            RequestError::Engine(e) => e.code(),
            RequestError::GameClosed => "game_closed",
        }
    }

    fn to_msg(&self) -> ErrorMsg {
        error_msg(self.code(), self)
    }
}

/// Serves one client until its stream ends or a decode fault closes it.
pub async fn serve<R, W, E>(shared: Arc<Shared>, mut frames: R, sink: W)
where
    R: Stream<Item = Vec<u8>> + Unpin,
    W: Sink<String, Error = E> + Unpin + Send + 'static,
    E: std::fmt::Display + 'static,
{
    let conn = NEXT_CONN.fetch_add(1, Ordering::Relaxed);
    let (out, rx) = mpsc::unbounded_channel();
    let writer = tokio::spawn(write_loop(conn, rx, sink));
    let mut handler = Handler { shared, conn, out, session: Session::default(), game: None };

    while let Some(frame) = frames.next().await {
        let message = match decode_message(&frame) {
            Ok(m) => m,
            Err(e) => {
                tracing::debug!(conn, error = %e, "closing after decode fault");
                let _ = handler.out.send(ToClient::Close(Payload::error(e.code(), e.to_string())));
                break;
            }
        };
        if !handler.handle(message).await {
            break;
        }
    }
    if let Some(game) = &handler.game {
        let _ = game.commands.send(GameCommand::Detach { conn });
    }
    drop(handler);
    let _ = writer.await;
}

async fn write_loop<W, E>(conn: ConnId, mut rx: mpsc::UnboundedReceiver<ToClient>, mut sink: W)
where
    W: Sink<String, Error = E> + Unpin,
    E: std::fmt::Display,
{
    let mut seq = 0u64;
    while let Some(item) = rx.recv().await {
        let (payload, last) = match item {
            ToClient::Message(p) => (p, false),
            ToClient::Close(p) => (p, true),
        };
        seq += 1;
        let text = encode_message_string(&WireMessage { seq, payload });
        if let Err(e) = sink.send(text).await {
            tracing::debug!(conn, error = %e, "write failed");
            break;
        }
        if last {
            break;
        }
    }
    let _ = sink.close().await;
}

struct Handler {
    shared: Arc<Shared>,
    conn: ConnId,
    out: Outbound,
    session: Session,
    game: Option<GameHandle>,
}

impl Handler {
    fn reply(&self, payload: Payload) {
        let _ = self.out.send(ToClient::Message(payload));
    }

    fn fail(&self, e: &RequestError) {
        self.reply(Payload::Error(e.to_msg()));
    }

    /// Returns false once the connection should close.
    async fn handle(&mut self, message: WireMessage) -> bool {
        let phase = self.game.as_ref().map(|g| *g.phase.borrow());
        if let Legality::Rejected(why) = self.session.check(phase, &message) {
            let text = format!("{why}: {} is not accepted here", message.payload.type_name());
            self.reply(Payload::error("rejected", text));
            return true;
        }
        self.session.admit(&message);

        match message.payload {
            Payload::Join(m) => {
                let result = self.attach(&m.game_code, |conn, out, reply| GameCommand::Join {
                    conn,
                    name: m.name.clone(),
                    out,
                    reply,
                });
                if let Err(e) = result.await {
                    self.fail(&e);
                }
            }
            Payload::Resume(m) => {
                let result = self.attach(&m.game_code, |conn, out, reply| GameCommand::Resume {
                    conn,
                    token: m.resume_token.clone(),
                    out,
                    reply,
                });
                if let Err(e) = result.await {
                    self.fail(&e);
                }
            }
            Payload::AdminCreateGame(m) => match self.create(m) {
                Ok(handle) => {
                    self.reply(
                        GameCreated { game_code: handle.code.clone(), admin_token: handle.admin_token.clone() }.into(),
                    );
                    self.watch(handle);
                }
                Err(e) => self.fail(&e),
            },
            Payload::AdminSubscribe(m) => {
                let handle = self.shared.registry.lock().expect("registry lock").get(&m.game_code).cloned();
                match handle {
                    None => self.fail(&RequestError::GameNotFound(m.game_code)),
                    Some(h) if h.admin_token != m.admin_token => self.fail(&RequestError::BadToken(m.game_code)),
                    Some(h) => self.watch(h),
                }
            }
            payload => {
                let Some(game) = &self.game else { return true };
                if game.commands.send(GameCommand::Input { conn: self.conn, payload }).is_err() {
                    let _ = self.out.send(ToClient::Close(Payload::Error(RequestError::GameClosed.to_msg())));
                    return false;
                }
            }
        }
        true
    }

    /// Sends a join-like command and binds the session to the player it names.
    async fn attach(
        &mut self,
        code: &str,
        make: impl FnOnce(ConnId, Outbound, oneshot::Sender<Result<spacerace_core::PlayerId, ErrorMsg>>) -> GameCommand,
    ) -> Result<(), RequestError> {
        let handle = self
            .shared
            .registry
            .lock()
            .expect("registry lock")
            .get(code)
            .cloned()
            .ok_or_else(|| RequestError::GameNotFound(code.into()))?;
        let (reply, answer) = oneshot::channel();
        handle.commands.send(make(self.conn, self.out.clone(), reply)).map_err(|_| RequestError::GameClosed)?;
        match answer.await {
            Ok(Ok(player_id)) => {
                self.session.bind(SessionRole::Player { player_id, game_code: handle.code.clone() });
                self.game = Some(handle);
                Ok(())
            }
            Ok(Err(msg)) => {
                self.reply(Payload::Error(msg));
                Ok(())
            }
            Err(_) => Err(RequestError::GameClosed),
        }
    }

    fn watch(&mut self, handle: GameHandle) {
        self.session
            .bind(SessionRole::Admin { game_code: handle.code.clone(), admin_token: handle.admin_token.clone() });
        let _ = handle.commands.send(GameCommand::Watch { conn: self.conn, out: self.out.clone() });
        self.game = Some(handle);
    }

    fn create(&self, m: AdminCreateGame) -> Result<GameHandle, RequestError> {
        let library = &self.shared.ctx.library;
        let bank: QuestionBank = match (m.bank, m.bank_name) {
            (Some(bank), _) => bank,
            (None, Some(name)) => library.load_bank(&name)?,
            (None, None) => return Err(RequestError::BankMissing),
        };
        let map_name = m.config.map_name.clone().unwrap_or_else(|| DEFAULT_MAP.into());
        let map = library.load_map(&map_name)?;
        let request = m.config;
        let mut config = GameConfig::new(
            request.teams,
            request.max_players_per_team,
            request.tasks_per_team,
            request.rng_seed.unwrap_or_else(|| rand::Rng::gen(&mut OsRng)),
        );
        config.cooldown_millis = request.cooldown_millis;
        config.energy_per_task = request.energy_per_task;
        config.bank_ref = bank.name.clone();
        config.map_ref = map_name;

        let ctx = self.shared.ctx.clone();
        let handle = self.shared.registry.lock().expect("registry lock").register(
            &mut OsRng,
            |code| -> Result<GameHandle, RequestError> {
                let state = GameState::create(code.clone(), config, bank, map)?;
                Ok(spawn_game(code, new_secret(&mut OsRng), state, ctx))
            },
        )?;
        tracing::info!(game = %handle.code, "game created");
        Ok(handle)
    }
}
