use alloc::string::String;
use core::fmt;

use super::{Flow, Payload, WireMessage};
use crate::engine::{Phase, PlayerId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionRole {
    Unbound,
    Player { player_id: PlayerId, game_code: String },
    Admin { game_code: String, admin_token: String },
}

/// Coarse game phase, as far as a connection handler knows it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseHint {
    Lobby,
    Running,
    Finished,
}

impl From<Phase> for PhaseHint {
    fn from(p: Phase) -> Self {
        match p {
            Phase::Lobby => PhaseHint::Lobby,
            Phase::Running { .. } => PhaseHint::Running,
            Phase::Finished { .. } => PhaseHint::Finished,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    /// The sender's role may not send this type.
    Role,
    /// `seq` did not increase.
    Seq,
    /// Admin credentials do not match the bound game.
    Credentials,
    /// The game is not in a phase that accepts this type.
    Phase,
    /// A server-to-client type sent by a client.
    Direction,
}

impl Rejection {
    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::Role => "role",
            Rejection::Seq => "seq",
            Rejection::Credentials => "credentials",
            Rejection::Phase => "phase",
            Rejection::Direction => "direction",
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Legality {
    Allowed,
    Rejected(Rejection),
}

/// Per-connection protocol state: who is talking and the last accepted seq.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub role: SessionRole,
    pub last_seq: Option<u64>,
}

impl Default for Session {
    fn default() -> Self {
        Self { role: SessionRole::Unbound, last_seq: None }
    }
}

impl Session {
    pub fn check(&self, phase: Option<PhaseHint>, message: &WireMessage) -> Legality {
        legal_in_session(self, phase, message)
    }

    /// Records the seq of a message that was allowed.
    pub fn admit(&mut self, message: &WireMessage) {
        self.last_seq = Some(message.seq);
    }

    pub fn bind(&mut self, role: SessionRole) {
        self.role = role;
    }
}

/// Decides whether `message` may be processed in this session. `phase` is
/// the current game phase if the handler knows it; `None` skips phase rules.
pub fn legal_in_session(session: &Session, phase: Option<PhaseHint>, message: &WireMessage) -> Legality {
    use Legality::*;
    use Rejection as R;

    if message.payload.flow() == Flow::ServerToClient {
        return Rejected(R::Direction);
    }
    if session.last_seq.is_some_and(|last| message.seq <= last) {
        return Rejected(R::Seq);
    }
    let phase_is = |allowed: &[PhaseHint]| match phase {
        Some(p) if !allowed.contains(&p) => Rejected(R::Phase),
        _ => Allowed,
    };
    let admin_matches = |code: &str, token: &str| match &session.role {
        SessionRole::Admin { game_code, admin_token } => {
            if game_code == code && admin_token == token {
                Allowed
            } else {
                Rejected(R::Credentials)
            }
        }
        _ => Rejected(R::Role),
    };

    match &message.payload {
        Payload::Join(_) | Payload::Resume(_) | Payload::AdminCreateGame(_) | Payload::AdminSubscribe(_) => {
            if session.role == SessionRole::Unbound {
                Allowed
            } else {
                Rejected(R::Role)
            }
        }
        Payload::SelectTeam(_) => match session.role {
            SessionRole::Player { .. } => phase_is(&[PhaseHint::Lobby]),
            _ => Rejected(R::Role),
        },
        Payload::Move(_) | Payload::Interact(_) | Payload::Answer(_) | Payload::CancelQuestion(_) => {
            match session.role {
                SessionRole::Player { .. } => phase_is(&[PhaseHint::Running]),
                _ => Rejected(R::Role),
            }
        }
        Payload::AdminLoadBank(m) => match admin_matches(&m.game_code, &m.admin_token) {
            Allowed => phase_is(&[PhaseHint::Lobby]),
            rejected => rejected,
        },
        Payload::AdminStart(m) => match admin_matches(&m.game_code, &m.admin_token) {
            Allowed => phase_is(&[PhaseHint::Lobby]),
            rejected => rejected,
        },
        Payload::AdminEnd(m) => match admin_matches(&m.game_code, &m.admin_token) {
            Allowed => phase_is(&[PhaseHint::Running, PhaseHint::Finished]),
            rejected => rejected,
        },
        _ => Rejected(R::Direction),
    }
}
