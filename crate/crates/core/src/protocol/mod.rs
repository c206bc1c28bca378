//! Wire vocabulary shared by the server, the bots and the browser client.
//!
//! Every message is one JSON object `{"type": .., "seq": .., "payload": {..}}`
//! with keys in that order. Decoding is strict about declared fields and
//! ignores undeclared ones.

mod messages;
mod route;
mod session;

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use serde_json::Value;

pub use messages::*;
pub use route::{game_started_for, lobby_update_for, route_event, route_events, snapshot_for};
pub use session::{legal_in_session, Legality, PhaseHint, Rejection, Session, SessionRole};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    ClientToServer,
    ServerToClient,
}

macro_rules! vocabulary {
    ($( $variant:ident($payload:ty) = $name:literal, $flow:ident $(, $shared:ident)?; )*) => {
        /// The closed set of message payloads, tagged by their `type` spelling.
        #[derive(Debug, Clone, PartialEq)]
        pub enum Payload {
            $( $variant($payload), )*
        }

        /// Every message type with its direction.
        pub const VOCABULARY: &[(&str, Flow)] = &[ $( ($name, Flow::$flow), )* ];

        impl Payload {
            pub fn type_name(&self) -> &'static str {
                match self {
                    $( Payload::$variant(_) => $name, )*
                }
            }

            pub fn flow(&self) -> Flow {
                match self {
                    $( Payload::$variant(_) => Flow::$flow, )*
                }
            }

            fn serialize_payload<M: SerializeMap>(&self, map: &mut M) -> Result<(), M::Error> {
                match self {
                    $( Payload::$variant(p) => map.serialize_entry("payload", p), )*
                }
            }

            fn decode_payload(type_name: &str, payload: Value) -> Result<Payload, DecodeError> {
                match type_name {
                    $( $name => decode_typed(payload).map(Payload::$variant), )*
                    other => Err(DecodeError::UnknownType(other.into())),
                }
            }
        }

        $( payload_from!($variant, $payload $(, $shared)?); )*
    };
}

// Payload types shared by several variants get no `From` impl.
macro_rules! payload_from {
    ($variant:ident, $payload:ty) => {
        impl From<$payload> for Payload {
            fn from(p: $payload) -> Self {
                Payload::$variant(p)
            }
        }
    };
    ($variant:ident, $payload:ty, shared) => {};
}

vocabulary! {
    Join(Join) = "join", ClientToServer;
    SelectTeam(SelectTeam) = "select_team", ClientToServer;
    Move(Move) = "move", ClientToServer;
    Interact(Interact) = "interact", ClientToServer;
    Answer(Answer) = "answer", ClientToServer;
    CancelQuestion(CancelQuestion) = "cancel_question", ClientToServer;
    Resume(Resume) = "resume", ClientToServer;
    AdminCreateGame(AdminCreateGame) = "admin_create_game", ClientToServer;
    AdminLoadBank(AdminLoadBank) = "admin_load_bank", ClientToServer;
    AdminStart(AdminGame) = "admin_start", ClientToServer, shared;
    AdminEnd(AdminGame) = "admin_end", ClientToServer, shared;
    AdminSubscribe(AdminGame) = "admin_subscribe", ClientToServer, shared;
    Joined(Joined) = "joined", ServerToClient;
    LobbyUpdate(LobbyUpdate) = "lobby_update", ServerToClient;
    GameStarted(GameStarted) = "game_started", ServerToClient;
    PositionChanged(PositionChanged) = "position_changed", ServerToClient;
    Question(QuestionMsg) = "question", ServerToClient;
    AnswerResult(AnswerResult) = "answer_result", ServerToClient;
    TaskUpdate(TaskUpdate) = "task_update", ServerToClient;
    CooldownActive(CooldownActive) = "cooldown_active", ServerToClient;
    NothingHere(NothingHere) = "nothing_here", ServerToClient;
    TaskAlreadyCompleted(TaskAlreadyCompleted) = "task_already_completed", ServerToClient;
    GameOver(GameOver) = "game_over", ServerToClient;
    Snapshot(SnapshotMsg) = "snapshot", ServerToClient;
    Report(ReportMsg) = "report", ServerToClient;
    GameCreated(GameCreated) = "game_created", ServerToClient;
    Error(ErrorMsg) = "error", ServerToClient;
}

impl Payload {
    pub fn error(code: impl Into<String>, message: impl Into<String>) -> Self {
        Payload::Error(ErrorMsg { code: code.into(), message: message.into() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    /// Sender-side counter, strictly increasing per connection.
    pub seq: u64,
    pub payload: Payload,
}

impl WireMessage {
    pub fn new(seq: u64, payload: impl Into<Payload>) -> Self {
        Self { seq, payload: payload.into() }
    }
}

impl Serialize for WireMessage {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(3))?;
        map.serialize_entry("type", self.payload.type_name())?;
        map.serialize_entry("seq", &self.seq)?;
        self.payload.serialize_payload(&mut map)?;
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("frame is not JSON")]
    NotJson,
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("schema violation at {field}: {message}")]
    SchemaViolation { field: String, message: String },
}

impl DecodeError {
    pub fn code(&self) -> &'static str {
        match self {
            DecodeError::NotJson => "not_json",
            DecodeError::UnknownType(_) => "unknown_type",
            DecodeError::SchemaViolation { .. } => "schema_violation",
        }
    }

    fn violation(field: &str, message: &str) -> Self {
        DecodeError::SchemaViolation { field: field.into(), message: message.into() }
    }
}

fn decode_typed<T: serde::de::DeserializeOwned>(payload: Value) -> Result<T, DecodeError> {
    serde_path_to_error::deserialize(payload).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { String::from("payload") } else { alloc::format!("payload.{path}") };
        DecodeError::SchemaViolation { field, message: e.into_inner().to_string() }
    })
}

/// Compact single-line JSON, keys ordered `type`, `seq`, `payload`.
pub fn encode_message(message: &WireMessage) -> Vec<u8> {
    serde_json::to_vec(message).expect("wire messages serialize")
}

pub fn encode_message_string(message: &WireMessage) -> String {
    serde_json::to_string(message).expect("wire messages serialize")
}

pub fn decode_message(bytes: &[u8]) -> Result<WireMessage, DecodeError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|_| DecodeError::NotJson)?;
    let Value::Object(mut object) = value else {
        return Err(DecodeError::violation("message", "expected an object"));
    };
    let type_name = match object.get("type") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(DecodeError::violation("type", "expected a string")),
        None => return Err(DecodeError::violation("type", "missing")),
    };
    if !VOCABULARY.iter().any(|(name, _)| *name == type_name) {
        return Err(DecodeError::UnknownType(type_name));
    }
    let seq = match object.get("seq") {
        Some(v) => v.as_u64().ok_or_else(|| DecodeError::violation("seq", "expected an unsigned integer"))?,
        None => return Err(DecodeError::violation("seq", "missing")),
    };
    let payload = object.remove("payload").ok_or_else(|| DecodeError::violation("payload", "missing"))?;
    if !payload.is_object() {
        return Err(DecodeError::violation("payload", "expected an object"));
    }
    let payload = Payload::decode_payload(&type_name, payload)?;
    Ok(WireMessage { seq, payload })
}

#[cfg(test)]
mod tests;
