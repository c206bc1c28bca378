//! The authoritative game state machine.
//!
//! Every operation takes the current time as a millisecond count and either
//! returns the events it produced (already appended to the log) or an error,
//! in which case the state is left untouched. Applying the same timestamped
//! inputs to the same created game always yields the same state and log.

mod config;
mod event;
mod report;

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::grading::{self, GradeError, Submission, Verdict};
use crate::question::{present_question, validate_bank, BankError, QuestionBank, TokenMap};
use crate::rng;
use crate::world::{Cell, Direction, StationId, WorldMap};

pub use config::{GameConfig, DEFAULT_COOLDOWN_MILLIS, MAX_PLAYERS_PER_TEAM, MAX_TEAMS};
pub use event::{Audience, Event, LoggedEvent, PlayerPosition, TeamTasks};
pub use report::{
    EventLogDigest, FinishEntry, FinishOutcome, PlayerReport, PlayerSnapshot, Report, RosterEntry, SupervisionSnapshot,
    TaskReport, TeamSnapshot,
};

pub type TeamIndex = u8;

/// Accepted moves per player within any window of [`MOVE_WINDOW_MILLIS`].
pub const MAX_MOVES_PER_WINDOW: usize = 10;
pub const MOVE_WINDOW_MILLIS: u64 = 1_000;
pub const MAX_NAME_CHARS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub u32);

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    /// A team completed all of its tasks.
    NaturalEnd,
    AdminEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Phase {
    Lobby,
    #[serde(rename_all = "camelCase")]
    Running {
        started_at_millis: u64,
    },
    #[serde(rename_all = "camelCase")]
    Finished {
        winner: Option<TeamIndex>,
        started_at_millis: u64,
        ended_at_millis: u64,
        reason: EndReason,
    },
}

impl Phase {
    pub fn is_lobby(&self) -> bool {
        matches!(self, Phase::Lobby)
    }

    pub fn is_running(&self) -> bool {
        matches!(self, Phase::Running { .. })
    }

    pub fn is_finished(&self) -> bool {
        matches!(self, Phase::Finished { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    #[serde(rename_all = "camelCase")]
    Completed {
        by_player: PlayerId,
        at_millis: u64,
    },
}

impl TaskStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, TaskStatus::Completed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Task {
    pub task_id: String,
    pub question_id: String,
    pub station_id: StationId,
    pub status: TaskStatus,
}

/// What players see of a task: no question binding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskView {
    pub task_id: String,
    pub station_id: StationId,
    pub status: TaskStatus,
}

impl From<&Task> for TaskView {
    fn from(t: &Task) -> Self {
        TaskView { task_id: t.task_id.clone(), station_id: t.station_id, status: t.status }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Player {
    pub name: String,
    pub team: Option<TeamIndex>,
    /// Unset until the game starts.
    pub pos: Option<Cell>,
    pub connected: bool,
    recent_moves: VecDeque<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TeamState {
    pub tasks: Vec<Task>,
    pub energy: u64,
}

impl TeamState {
    pub fn completed(&self) -> u32 {
        self.tasks.iter().filter(|t| t.status.is_completed()).count() as u32
    }

    pub fn views(&self) -> Vec<TaskView> {
        self.tasks.iter().map(TaskView::from).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivePresentation {
    pub task_id: String,
    pub tokens: TokenMap,
    pub presented_at_millis: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid config: {field} {rule}")]
    ConfigInvalid { field: &'static str, rule: &'static str },
    #[error("bank holds {available} questions but {needed} tasks per team were requested")]
    BankTooSmall { needed: u32, available: usize },
    #[error(transparent)]
    InvalidBank(#[from] BankError),
    #[error("the game no longer accepts players")]
    GameNotJoinable,
    #[error("every team is full")]
    GameFull,
    #[error("player names must have 1 to 32 characters")]
    InvalidName,
    #[error("team is full")]
    TeamFull,
    #[error("no such team")]
    NoSuchTeam,
    #[error("not allowed in the current phase")]
    WrongPhase,
    #[error("no such player")]
    NoSuchPlayer,
    #[error("not enough teams have players")]
    NotEnoughPlayers,
    #[error("some players have not picked a team")]
    UnassignedPlayers,
    #[error("no question is open for that task")]
    NoActivePresentation,
    #[error(transparent)]
    Grade(#[from] GradeError),
}

impl EngineError {
    /// Stable snake_case code used in wire error messages.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::ConfigInvalid { .. } => "config_invalid",
            EngineError::BankTooSmall { .. } => "bank_too_small",
            EngineError::InvalidBank(_) => "invalid_bank",
            EngineError::GameNotJoinable => "game_not_joinable",
            EngineError::GameFull => "game_full",
            EngineError::InvalidName => "invalid_name",
            EngineError::TeamFull => "team_full",
            EngineError::NoSuchTeam => "no_such_team",
            EngineError::WrongPhase => "wrong_phase",
            EngineError::NoSuchPlayer => "no_such_player",
            EngineError::NotEnoughPlayers => "not_enough_players",
            EngineError::UnassignedPlayers => "unassigned_players",
            EngineError::NoActivePresentation => "no_active_presentation",
            EngineError::Grade(GradeError::TypeMismatch { .. }) => "type_mismatch",
            EngineError::Grade(GradeError::UnknownToken(_)) => "unknown_token",
            EngineError::Grade(_) => "invalid_submission",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    game_id: String,
    config: GameConfig,
    bank: QuestionBank,
    map: WorldMap,
    phase: Phase,
    players: BTreeMap<PlayerId, Player>,
    next_player: u32,
    teams: Vec<TeamState>,
    cooldowns: BTreeMap<(PlayerId, String), u64>,
    presentations: BTreeMap<PlayerId, ActivePresentation>,
    log: Vec<LoggedEvent>,
}

/// Samples `tasks_per_team` distinct questions and binds task `i` to the
/// station at list position `i mod |stations|`. Every team gets the same list.
fn assign_tasks(config: &GameConfig, bank: &QuestionBank, map: &WorldMap) -> Result<Vec<Task>, EngineError> {
    if config.tasks_per_team as usize > bank.len() {
        return Err(EngineError::BankTooSmall { needed: config.tasks_per_team, available: bank.len() });
    }
    let mut rng = rng::seeded(config.rng_seed);
    let picks = rand::seq::index::sample(&mut rng, bank.len(), config.tasks_per_team as usize);
    let stations = map.stations();
    Ok(picks
        .into_iter()
        .enumerate()
        .map(|(i, q)| Task {
            task_id: format!("T{}", i + 1),
            question_id: bank.questions[q].id.clone(),
            station_id: stations[i % stations.len()].id,
            status: TaskStatus::Pending,
        })
        .collect())
}

impl GameState {
    pub fn create(
        game_id: impl Into<String>,
        config: GameConfig,
        bank: QuestionBank,
        map: WorldMap,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        validate_bank(&bank)?;
        let tasks = assign_tasks(&config, &bank, &map)?;
        let teams = (0..config.teams).map(|_| TeamState { tasks: tasks.clone(), energy: 0 }).collect();
        Ok(GameState {
            game_id: game_id.into(),
            config,
            bank,
            map,
            phase: Phase::Lobby,
            players: BTreeMap::new(),
            next_player: 1,
            teams,
            cooldowns: BTreeMap::new(),
            presentations: BTreeMap::new(),
            log: Vec::new(),
        })
    }

    pub fn game_id(&self) -> &str {
        &self.game_id
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn bank(&self) -> &QuestionBank {
        &self.bank
    }

    pub fn map(&self) -> &WorldMap {
        &self.map
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn player(&self, id: PlayerId) -> Option<&Player> {
        self.players.get(&id)
    }

    pub fn players(&self) -> impl Iterator<Item = (PlayerId, &Player)> {
        self.players.iter().map(|(id, p)| (*id, p))
    }

    pub fn team(&self, team: TeamIndex) -> Option<&TeamState> {
        self.teams.get(team as usize)
    }

    pub fn teams(&self) -> &[TeamState] {
        &self.teams
    }

    pub fn team_size(&self, team: TeamIndex) -> usize {
        self.players.values().filter(|p| p.team == Some(team)).count()
    }

    pub fn event_log(&self) -> &[LoggedEvent] {
        &self.log
    }

    pub fn active_presentation(&self, player: PlayerId) -> Option<&ActivePresentation> {
        self.presentations.get(&player)
    }

    /// Expiry of a live cooldown, if `now` is still before it.
    pub fn cooldown(&self, player: PlayerId, task_id: &str, now: u64) -> Option<u64> {
        self.cooldowns.get(&(player, task_id.to_string())).copied().filter(|&expires| now < expires)
    }

    pub fn winner(&self) -> Option<TeamIndex> {
        match self.phase {
            Phase::Finished { winner, .. } => winner,
            _ => None,
        }
    }

    /// Appends to the log. Nothing is logged after game over, so the report
    /// digest stays stable while players disconnect.
    fn record(&mut self, now: u64, events: Vec<Event>) -> Vec<Event> {
        if matches!(self.log.last(), Some(LoggedEvent { event: Event::GameOver { .. }, .. })) {
            return events;
        }
        for event in &events {
            let seq = self.log.len() as u64;
            self.log.push(LoggedEvent { seq, at_millis: now, event: event.clone() });
        }
        events
    }

    fn require_player(&self, id: PlayerId) -> Result<&Player, EngineError> {
        self.players.get(&id).ok_or(EngineError::NoSuchPlayer)
    }

    pub fn join_player(&mut self, name: &str, now: u64) -> Result<(PlayerId, Vec<Event>), EngineError> {
        if !self.phase.is_lobby() {
            return Err(EngineError::GameNotJoinable);
        }
        let name = name.trim();
        if name.is_empty() || name.chars().count() > MAX_NAME_CHARS {
            return Err(EngineError::InvalidName);
        }
        if self.players.len() >= self.config.capacity() {
            return Err(EngineError::GameFull);
        }
        let id = PlayerId(self.next_player);
        self.next_player += 1;
        self.players.insert(
            id,
            Player { name: name.into(), team: None, pos: None, connected: true, recent_moves: VecDeque::new() },
        );
        let events = self.record(now, alloc::vec![Event::PlayerJoined { player_id: id, name: name.into() }]);
        Ok((id, events))
    }

    /// Drops a player from the lobby, e.g. when their connection closes
    /// before the game starts.
    pub fn leave_player(&mut self, player: PlayerId, now: u64) -> Result<Vec<Event>, EngineError> {
        if !self.phase.is_lobby() {
            return Err(EngineError::WrongPhase);
        }
        self.require_player(player)?;
        self.players.remove(&player);
        Ok(self.record(now, alloc::vec![Event::PlayerLeft { player_id: player }]))
    }

    pub fn select_team(&mut self, player: PlayerId, team: TeamIndex, now: u64) -> Result<Vec<Event>, EngineError> {
        if !self.phase.is_lobby() {
            return Err(EngineError::WrongPhase);
        }
        let current = self.require_player(player)?.team;
        if team >= self.config.teams {
            return Err(EngineError::NoSuchTeam);
        }
        if current != Some(team) && self.team_size(team) >= self.config.max_players_per_team as usize {
            return Err(EngineError::TeamFull);
        }
        if let Some(p) = self.players.get_mut(&player) {
            p.team = Some(team);
        }
        Ok(self.record(now, alloc::vec![Event::TeamSelected { player_id: player, team }]))
    }

    /// Swaps the question bank before the game starts and re-draws the tasks.
    pub fn replace_bank(&mut self, bank: QuestionBank, now: u64) -> Result<Vec<Event>, EngineError> {
        if !self.phase.is_lobby() {
            return Err(EngineError::WrongPhase);
        }
        validate_bank(&bank)?;
        let tasks = assign_tasks(&self.config, &bank, &self.map)?;
        for team in &mut self.teams {
            team.tasks = tasks.clone();
        }
        self.config.bank_ref = bank.name.clone();
        let bank_ref = bank.name.clone();
        self.bank = bank;
        Ok(self.record(now, alloc::vec![Event::BankReplaced { bank_ref }]))
    }

    pub fn set_connected(&mut self, player: PlayerId, connected: bool, now: u64) -> Result<Vec<Event>, EngineError> {
        let p = self.players.get_mut(&player).ok_or(EngineError::NoSuchPlayer)?;
        if p.connected == connected {
            return Ok(Vec::new());
        }
        p.connected = connected;
        Ok(self.record(now, alloc::vec![Event::ConnectionChanged { player_id: player, connected }]))
    }

    pub fn start_game(&mut self, now: u64) -> Result<Vec<Event>, EngineError> {
        if !self.phase.is_lobby() {
            return Err(EngineError::WrongPhase);
        }
        if self.players.values().any(|p| p.team.is_none()) {
            return Err(EngineError::UnassignedPlayers);
        }
        let non_empty = (0..self.config.teams).filter(|&t| self.team_size(t) > 0).count();
        let needed = if self.config.teams == 1 { 1 } else { 2 };
        if non_empty < needed {
            return Err(EngineError::NotEnoughPlayers);
        }

        let mut placed = [0usize; crate::world::TEAM_SLOTS];
        let mut positions = Vec::with_capacity(self.players.len());
        for (id, p) in self.players.iter_mut() {
            let team = p.team.unwrap_or_default() as usize;
            let spawns = self.map.spawns(team);
            let cell = spawns[placed[team] % spawns.len()];
            placed[team] += 1;
            p.pos = Some(cell);
            positions.push(PlayerPosition { player_id: *id, cell });
        }
        self.phase = Phase::Running { started_at_millis: now };
        let tasks = self
            .teams
            .iter()
            .enumerate()
            .map(|(t, team)| TeamTasks { team: t as TeamIndex, tasks: team.views() })
            .collect();
        Ok(self.record(now, alloc::vec![Event::GameStarted { map_ref: self.config.map_ref.clone(), tasks, positions }]))
    }

    fn require_running_player(&self, player: PlayerId) -> Result<&Player, EngineError> {
        if !self.phase.is_running() {
            return Err(EngineError::WrongPhase);
        }
        self.require_player(player)
    }

    /// Moves one cell. Moving off the current cell closes any open question
    /// without grading it. Moves past the rate limit are silently dropped.
    pub fn handle_move(&mut self, player: PlayerId, dir: Direction, now: u64) -> Result<Vec<Event>, EngineError> {
        let p = self.require_running_player(player)?;
        let Some(pos) = p.pos else { return Ok(Vec::new()) };
        let in_window = p.recent_moves.iter().filter(|&&t| now < t.saturating_add(MOVE_WINDOW_MILLIS)).count();
        if in_window >= MAX_MOVES_PER_WINDOW {
            return Ok(Vec::new());
        }
        let next = self.map.apply_move(pos, dir);
        if next == pos {
            return Ok(Vec::new());
        }
        let p = self.players.get_mut(&player).ok_or(EngineError::NoSuchPlayer)?;
        p.recent_moves.retain(|&t| now < t.saturating_add(MOVE_WINDOW_MILLIS));
        p.recent_moves.push_back(now);
        p.pos = Some(next);
        let mut events = Vec::new();
        if let Some(open) = self.presentations.remove(&player) {
            events.push(Event::PresentationCancelled { player_id: player, task_id: open.task_id });
        }
        events.push(Event::PositionChanged { player_id: player, cell: next });
        Ok(self.record(now, events))
    }

    pub fn handle_interact(&mut self, player: PlayerId, now: u64) -> Result<Vec<Event>, EngineError> {
        let p = self.require_running_player(player)?;
        let (Some(team), Some(pos)) = (p.team, p.pos) else {
            return Ok(self.record(now, alloc::vec![Event::NothingHere { player_id: player }]));
        };
        self.cooldowns.retain(|(pid, _), expires| *pid != player || now < *expires);

        let Some(station) = self.map.reachable_station(pos) else {
            return Ok(self.record(now, alloc::vec![Event::NothingHere { player_id: player }]));
        };
        let pending: Vec<&Task> = self.teams[team as usize]
            .tasks
            .iter()
            .filter(|t| t.station_id == station && !t.status.is_completed())
            .collect();
        if pending.is_empty() {
            return Ok(self.record(now, alloc::vec![Event::NothingHere { player_id: player }]));
        }
        let cooling = |t: &Task| self.cooldowns.get(&(player, t.task_id.clone())).copied();
        let Some(task) = pending.iter().find(|t| cooling(t).is_none()) else {
            let (task_id, expires_at) = pending
                .iter()
                .filter_map(|t| cooling(t).map(|e| (t.task_id.clone(), e)))
                .min_by_key(|(_, e)| *e)
                .unwrap_or_default();
            return Ok(self.record(now, alloc::vec![Event::CooldownActive { player_id: player, task_id, expires_at }]));
        };

        let task_id = task.task_id.clone();
        let question = self.bank.get(&task.question_id).expect("tasks reference questions of the frozen bank");
        let seed = self.config.rng_seed.wrapping_add(self.log.len() as u64);
        let (view, tokens) = present_question(question, &task_id, seed);
        self.presentations.insert(player, ActivePresentation { task_id, tokens, presented_at_millis: now });
        Ok(self.record(now, alloc::vec![Event::QuestionPresented { player_id: player, question: view }]))
    }

    /// Closes the open question, if any, without grading it.
    pub fn handle_cancel(&mut self, player: PlayerId, now: u64) -> Result<Vec<Event>, EngineError> {
        self.require_running_player(player)?;
        match self.presentations.remove(&player) {
            Some(open) => Ok(self
                .record(now, alloc::vec![Event::PresentationCancelled { player_id: player, task_id: open.task_id }])),
            None => Ok(Vec::new()),
        }
    }

    pub fn handle_answer(
        &mut self,
        player: PlayerId,
        task_id: &str,
        submission: &Submission,
        now: u64,
    ) -> Result<Vec<Event>, EngineError> {
        let p = self.require_running_player(player)?;
        let team = p.team.ok_or(EngineError::NoActivePresentation)?;
        let open = self
            .presentations
            .get(&player)
            .filter(|open| open.task_id == task_id)
            .ok_or(EngineError::NoActivePresentation)?;
        let task_index = self.teams[team as usize]
            .tasks
            .iter()
            .position(|t| t.task_id == task_id)
            .ok_or(EngineError::NoActivePresentation)?;
        let task = &self.teams[team as usize].tasks[task_index];

        if task.status.is_completed() {
            self.presentations.remove(&player);
            return Ok(self
                .record(now, alloc::vec![Event::TaskAlreadyCompleted { player_id: player, task_id: task_id.into() }]));
        }

        let question = self.bank.get(&task.question_id).expect("tasks reference questions of the frozen bank");
        let verdict = grading::grade(question, &open.tokens, submission)?.verdict;
        self.presentations.remove(&player);

        let mut events = Vec::new();
        match verdict {
            Verdict::Correct => {
                let energy_per_task = u64::from(self.config.energy_per_task);
                let state = &mut self.teams[team as usize];
                state.tasks[task_index].status = TaskStatus::Completed { by_player: player, at_millis: now };
                state.energy += energy_per_task;
                let completed = state.completed();
                let total = state.tasks.len() as u32;
                events.push(Event::AnswerResult {
                    player_id: player,
                    team,
                    task_id: task_id.into(),
                    verdict,
                    cooldown_until: None,
                });
                events.push(Event::TaskListUpdate {
                    team,
                    completed,
                    total,
                    energy: state.energy,
                    tasks: state.views(),
                });
                if completed == total {
                    let started_at_millis = match self.phase {
                        Phase::Running { started_at_millis } => started_at_millis,
                        _ => now,
                    };
                    self.phase = Phase::Finished {
                        winner: Some(team),
                        started_at_millis,
                        ended_at_millis: now,
                        reason: EndReason::NaturalEnd,
                    };
                    self.presentations.clear();
                    events.push(Event::GameOver { winner: Some(team), reason: EndReason::NaturalEnd });
                }
            }
            Verdict::Incorrect => {
                let until = now.saturating_add(self.config.cooldown_millis);
                self.cooldowns.insert((player, task_id.into()), until);
                events.push(Event::AnswerResult {
                    player_id: player,
                    team,
                    task_id: task_id.into(),
                    verdict,
                    cooldown_until: Some(until),
                });
            }
        }
        Ok(self.record(now, events))
    }

    /// Ends a running game (no winner) or re-reads the report of a finished
    /// one. Finalizing twice yields the same report.
    pub fn finalize(&mut self, now: u64, reason: EndReason) -> Result<(Report, Vec<Event>), EngineError> {
        let events = match self.phase {
            Phase::Lobby => return Err(EngineError::WrongPhase),
            Phase::Running { started_at_millis } => {
                self.phase = Phase::Finished { winner: None, started_at_millis, ended_at_millis: now, reason };
                self.presentations.clear();
                self.record(now, alloc::vec![Event::GameOver { winner: None, reason }])
            }
            Phase::Finished { .. } => Vec::new(),
        };
        let report = self.report().expect("phase is finished");
        Ok((report, events))
    }
}
