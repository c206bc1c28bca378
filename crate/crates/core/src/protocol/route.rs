//! Turns engine events into addressed wire payloads.

use alloc::vec::Vec;

use super::messages::*;
use super::Payload;
use crate::engine::{Audience, Event, GameState, PlayerPosition, TeamIndex, TeamTasks};

pub fn lobby_update_for(state: &GameState, game_code: &str) -> LobbyUpdate {
    LobbyUpdate {
        game_code: game_code.into(),
        teams: state.config().teams,
        max_players_per_team: state.config().max_players_per_team,
        players: state.roster(),
    }
}

pub fn snapshot_for(state: &GameState, game_code: &str) -> SnapshotMsg {
    SnapshotMsg { game_code: game_code.into(), snapshot: state.snapshot() }
}

/// A `game_started` reflecting the current positions and task statuses, for
/// players who (re)attach to a running game.
pub fn game_started_for(state: &GameState) -> GameStarted {
    let tasks = state
        .teams()
        .iter()
        .enumerate()
        .map(|(t, team)| TeamTasks { team: t as TeamIndex, tasks: team.views() })
        .collect();
    let positions =
        state.players().filter_map(|(id, p)| p.pos.map(|cell| PlayerPosition { player_id: id, cell })).collect();
    GameStarted { map_ref: state.config().map_ref.clone(), map: state.map().clone(), tasks, positions }
}

/// The wire message an event becomes and who receives it. Some events stay
/// internal to the server and yield `None`.
pub fn route_event(state: &GameState, game_code: &str, event: &Event) -> Option<(Audience, Payload)> {
    let payload: Payload = match event {
        Event::PlayerJoined { .. }
        | Event::PlayerLeft { .. }
        | Event::TeamSelected { .. }
        | Event::ConnectionChanged { .. } => lobby_update_for(state, game_code).into(),
        Event::BankReplaced { .. } => snapshot_for(state, game_code).into(),
        Event::GameStarted { map_ref, tasks, positions } => GameStarted {
            map_ref: map_ref.clone(),
            map: state.map().clone(),
            tasks: tasks.clone(),
            positions: positions.clone(),
        }
        .into(),
        Event::PositionChanged { player_id, cell } => PositionChanged { player_id: *player_id, cell: *cell }.into(),
        Event::QuestionPresented { question, .. } => QuestionMsg { question: question.clone() }.into(),
        Event::PresentationCancelled { .. } => return None,
        Event::CooldownActive { task_id, expires_at, .. } => {
            CooldownActive { task_id: task_id.clone(), expires_at: *expires_at }.into()
        }
        Event::NothingHere { .. } => NothingHere {}.into(),
        Event::AnswerResult { task_id, verdict, cooldown_until, .. } => {
            AnswerResult { task_id: task_id.clone(), verdict: *verdict, cooldown_until: *cooldown_until }.into()
        }
        Event::TaskListUpdate { team, completed, total, energy, tasks } => {
            TaskUpdate { team: *team, completed: *completed, total: *total, energy: *energy, tasks: tasks.clone() }
                .into()
        }
        Event::TaskAlreadyCompleted { task_id, .. } => TaskAlreadyCompleted { task_id: task_id.clone() }.into(),
        Event::GameOver { winner, reason } => GameOver { winner: *winner, reason: *reason }.into(),
    };
    Some((event.audience(), payload))
}

/// Routes a batch, keeping order.
pub fn route_events(state: &GameState, game_code: &str, events: &[Event]) -> Vec<(Audience, Payload)> {
    events.iter().filter_map(|e| route_event(state, game_code, e)).collect()
}
