use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{EndReason, PlayerId, TaskView, TeamIndex};
use crate::grading::Verdict;
use crate::question::PresentedQuestion;
use crate::world::Cell;

/// Everything the engine reports back. Each event is also appended to the
/// game's log with its admission time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    #[serde(rename_all = "camelCase")]
    PlayerJoined { player_id: PlayerId, name: String },
    #[serde(rename_all = "camelCase")]
    PlayerLeft { player_id: PlayerId },
    #[serde(rename_all = "camelCase")]
    TeamSelected { player_id: PlayerId, team: TeamIndex },
    #[serde(rename_all = "camelCase")]
    BankReplaced { bank_ref: String },
    #[serde(rename_all = "camelCase")]
    ConnectionChanged { player_id: PlayerId, connected: bool },
    #[serde(rename_all = "camelCase")]
    GameStarted { map_ref: String, tasks: Vec<TeamTasks>, positions: Vec<PlayerPosition> },
    #[serde(rename_all = "camelCase")]
    PositionChanged { player_id: PlayerId, cell: Cell },
    #[serde(rename_all = "camelCase")]
    QuestionPresented { player_id: PlayerId, question: PresentedQuestion },
    #[serde(rename_all = "camelCase")]
    PresentationCancelled { player_id: PlayerId, task_id: String },
    #[serde(rename_all = "camelCase")]
    CooldownActive { player_id: PlayerId, task_id: String, expires_at: u64 },
    #[serde(rename_all = "camelCase")]
    NothingHere { player_id: PlayerId },
    #[serde(rename_all = "camelCase")]
    AnswerResult {
        player_id: PlayerId,
        team: TeamIndex,
        task_id: String,
        verdict: Verdict,
        cooldown_until: Option<u64>,
    },
    #[serde(rename_all = "camelCase")]
    TaskListUpdate { team: TeamIndex, completed: u32, total: u32, energy: u64, tasks: Vec<TaskView> },
    #[serde(rename_all = "camelCase")]
    TaskAlreadyCompleted { player_id: PlayerId, task_id: String },
    #[serde(rename_all = "camelCase")]
    GameOver { winner: Option<TeamIndex>, reason: EndReason },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamTasks {
    pub team: TeamIndex,
    pub tasks: Vec<TaskView>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlayerPosition {
    pub player_id: PlayerId,
    pub cell: Cell,
}

/// Who an event is addressed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Audience {
    Player(PlayerId),
    Team(TeamIndex),
    /// Every player and admin of the game.
    Everyone,
    /// Roster changes: every connected client, lobby views included.
    Roster,
    Admins,
}

impl Event {
    pub fn audience(&self) -> Audience {
        match self {
            Event::PlayerJoined { .. }
            | Event::PlayerLeft { .. }
            | Event::TeamSelected { .. }
            | Event::ConnectionChanged { .. } => Audience::Roster,
            Event::BankReplaced { .. } => Audience::Admins,
            Event::GameStarted { .. } | Event::PositionChanged { .. } | Event::GameOver { .. } => Audience::Everyone,
            Event::TaskListUpdate { team, .. } => Audience::Team(*team),
            Event::QuestionPresented { player_id, .. }
            | Event::PresentationCancelled { player_id, .. }
            | Event::CooldownActive { player_id, .. }
            | Event::NothingHere { player_id }
            | Event::AnswerResult { player_id, .. }
            | Event::TaskAlreadyCompleted { player_id, .. } => Audience::Player(*player_id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LoggedEvent {
    pub seq: u64,
    pub at_millis: u64,
    #[serde(flatten)]
    pub event: Event,
}
