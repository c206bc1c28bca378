//! Read-only projections of a game: the live supervision snapshot and the
//! post-game report.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EndReason, Event, GameConfig, GameState, Phase, PlayerId, TaskView, TeamIndex};
use crate::grading::Verdict;
use crate::world::{Cell, StationId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SupervisionSnapshot {
    pub phase: Phase,
    pub teams: Vec<TeamSnapshot>,
    pub players: Vec<PlayerSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TeamSnapshot {
    pub team: TeamIndex,
    pub players: u32,
    pub energy: u64,
    pub completed: u32,
    pub total: u32,
    pub tasks: Vec<TaskView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlayerSnapshot {
    pub player_id: PlayerId,
    pub name: String,
    pub team: Option<TeamIndex>,
    pub pos: Option<Cell>,
    pub connected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RosterEntry {
    pub player_id: PlayerId,
    pub name: String,
    pub team: Option<TeamIndex>,
    pub connected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub game_id: String,
    pub config: GameConfig,
    pub end_reason: EndReason,
    pub started_at_millis: u64,
    pub ended_at_millis: u64,
    pub winner: Option<TeamIndex>,
    /// Winner first, then the remaining teams by completed count.
    pub finish_order: Vec<FinishEntry>,
    pub tasks: Vec<TaskReport>,
    pub players: Vec<PlayerReport>,
    pub event_log: EventLogDigest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FinishEntry {
    pub team: TeamIndex,
    pub completed: u32,
    pub outcome: FinishOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum FinishOutcome {
    #[serde(rename_all = "camelCase")]
    Finished {
        at_millis: u64,
    },
    DidNotFinish,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskReport {
    pub team: TeamIndex,
    pub task_id: String,
    pub question_id: String,
    pub station_id: StationId,
    /// Graded submissions, right or wrong.
    pub attempts: u32,
    pub completed_by: Option<PlayerId>,
    pub completed_at_millis: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlayerReport {
    pub player_id: PlayerId,
    pub name: String,
    pub team: Option<TeamIndex>,
    pub submissions: u32,
    pub correct_submissions: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EventLogDigest {
    pub events: u64,
    /// Hex SHA-256 of the compact JSON event log.
    pub sha256: String,
}

impl GameState {
    pub fn snapshot(&self) -> SupervisionSnapshot {
        let teams = self
            .teams
            .iter()
            .enumerate()
            .map(|(t, team)| TeamSnapshot {
                team: t as TeamIndex,
                players: self.team_size(t as TeamIndex) as u32,
                energy: team.energy,
                completed: team.completed(),
                total: team.tasks.len() as u32,
                tasks: team.views(),
            })
            .collect();
        let players = self
            .players
            .iter()
            .map(|(id, p)| PlayerSnapshot {
                player_id: *id,
                name: p.name.clone(),
                team: p.team,
                pos: p.pos,
                connected: p.connected,
            })
            .collect();
        SupervisionSnapshot { phase: self.phase, teams, players }
    }

    pub fn roster(&self) -> Vec<RosterEntry> {
        self.players
            .iter()
            .map(|(id, p)| RosterEntry { player_id: *id, name: p.name.clone(), team: p.team, connected: p.connected })
            .collect()
    }

    pub fn log_digest(&self) -> EventLogDigest {
        let bytes = serde_json::to_vec(&self.log).expect("event log serializes");
        let hash = Sha256::digest(&bytes);
        let mut sha256 = String::with_capacity(64);
        for byte in hash {
            let _ = write!(sha256, "{byte:02x}");
        }
        EventLogDigest { events: self.log.len() as u64, sha256 }
    }

    /// The post-game report, derived from the event log. `None` until the
    /// game has finished.
    pub fn report(&self) -> Option<Report> {
        let Phase::Finished { winner, started_at_millis, ended_at_millis, reason } = self.phase else {
            return None;
        };

        let mut attempts: BTreeMap<(TeamIndex, &str), u32> = BTreeMap::new();
        let mut per_player: BTreeMap<PlayerId, (u32, u32)> = BTreeMap::new();
        for logged in &self.log {
            if let Event::AnswerResult { player_id, team, task_id, verdict, .. } = &logged.event {
                *attempts.entry((*team, task_id.as_str())).or_default() += 1;
                let entry = per_player.entry(*player_id).or_default();
                entry.0 += 1;
                if *verdict == Verdict::Correct {
                    entry.1 += 1;
                }
            }
        }

        let participating: Vec<TeamIndex> = (0..self.config.teams).filter(|&t| self.team_size(t) > 0).collect();

        let mut finish_order: Vec<FinishEntry> = participating
            .iter()
            .map(|&team| FinishEntry {
                team,
                completed: self.teams[team as usize].completed(),
                outcome: if winner == Some(team) {
                    FinishOutcome::Finished { at_millis: ended_at_millis }
                } else {
                    FinishOutcome::DidNotFinish
                },
            })
            .collect();
        finish_order.sort_by_key(|e| {
            (matches!(e.outcome, FinishOutcome::DidNotFinish), core::cmp::Reverse(e.completed), e.team)
        });

        let tasks = participating
            .iter()
            .flat_map(|&team| {
                let attempts = &attempts;
                self.teams[team as usize].tasks.iter().map(move |task| {
                    let (completed_by, completed_at_millis) = match task.status {
                        super::TaskStatus::Completed { by_player, at_millis } => (Some(by_player), Some(at_millis)),
                        super::TaskStatus::Pending => (None, None),
                    };
                    TaskReport {
                        team,
                        task_id: task.task_id.clone(),
                        question_id: task.question_id.clone(),
                        station_id: task.station_id,
                        attempts: attempts.get(&(team, task.task_id.as_str())).copied().unwrap_or(0),
                        completed_by,
                        completed_at_millis,
                    }
                })
            })
            .collect();

        let players = self
            .players
            .iter()
            .map(|(id, p)| {
                let (submissions, correct_submissions) = per_player.get(id).copied().unwrap_or((0, 0));
                PlayerReport { player_id: *id, name: p.name.clone(), team: p.team, submissions, correct_submissions }
            })
            .collect();

        Some(Report {
            game_id: self.game_id.clone(),
            config: self.config.clone(),
            end_reason: reason,
            started_at_millis,
            ended_at_millis,
            winner,
            finish_order,
            tasks,
            players,
            event_log: self.log_digest(),
        })
    }
}

impl Report {
    /// Canonical bytes: two-space indented JSON with a trailing newline.
    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }
}
