//! One task per hosted game. Every connection of the game submits its inputs
//! to the same channel, so the engine sees a single total order and admission
//! time is read exactly once per input.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rand::rngs::OsRng;
use spacerace_core::engine::{Audience, EndReason, EngineError, Event, GameState, PlayerId};
use spacerace_core::protocol::{
    game_started_for, lobby_update_for, route_event, snapshot_for, ErrorMsg, GameOver, Joined, Payload, PhaseHint,
    ReportMsg,
};
use spacerace_core::Report;
use tokio::sync::{mpsc, oneshot, watch};
use tokio::time::{sleep_until, Instant, MissedTickBehavior};

use crate::library::Library;
use crate::registry::{new_secret, GameHandle, Registry};

pub type ConnId = u64;
pub type Outbound = mpsc::UnboundedSender<ToClient>;

pub const SNAPSHOT_INTERVAL: Duration = Duration::from_secs(1);

/// What a connection's writer is asked to do.
#[derive(Debug)]
pub enum ToClient {
    Message(Payload),
    /// Send this last message, then close.
    Close(Payload),
}

#[derive(Debug)]
pub enum GameCommand {
    Join {
        conn: ConnId,
        name: String,
        out: Outbound,
        reply: oneshot::Sender<Result<PlayerId, ErrorMsg>>,
    },
    Resume {
        conn: ConnId,
        token: String,
        out: Outbound,
        reply: oneshot::Sender<Result<PlayerId, ErrorMsg>>,
    },
    /// An admin connection whose credentials were already checked.
    Watch {
        conn: ConnId,
        out: Outbound,
    },
    Input {
        conn: ConnId,
        payload: Payload,
    },
    Detach {
        conn: ConnId,
    },
}

pub fn error_msg(code: &str, message: impl ToString) -> ErrorMsg {
    ErrorMsg { code: code.into(), message: message.to_string() }
}

fn engine_error(e: &EngineError) -> ErrorMsg {
    error_msg(e.code(), e)
}

/// Wall-clock milliseconds that never run backwards.
#[derive(Debug, Default)]
struct Clock {
    last: u64,
}

impl Clock {
    fn now(&mut self) -> u64 {
        let wall = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        self.last = self.last.max(wall);
        self.last
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Player(PlayerId),
    Admin,
}

#[derive(Debug)]
struct Member {
    role: Role,
    out: Outbound,
}

/// Server-wide pieces a game needs besides its own state.
#[derive(Debug, Clone)]
pub struct GameContext {
    pub library: Arc<Library>,
    pub registry: Arc<Mutex<Registry>>,
    /// Reports that could not be written; kept for a retry at shutdown.
    pub unsaved_reports: Arc<Mutex<Vec<(String, Report)>>>,
    pub idle_timeout: Duration,
}

pub struct GameActor {
    code: String,
    state: GameState,
    members: BTreeMap<ConnId, Member>,
    resume_tokens: HashMap<String, PlayerId>,
    clock: Clock,
    phase: watch::Sender<PhaseHint>,
    report: Option<Report>,
    persisted: bool,
    ctx: GameContext,
}

/// Starts the task that owns `state` and returns the handle to reach it.
pub fn spawn_game(code: String, admin_token: String, state: GameState, ctx: GameContext) -> GameHandle {
    let (commands, rx) = mpsc::unbounded_channel();
    let (phase, phase_rx) = watch::channel(PhaseHint::from(state.phase()));
    let actor = GameActor {
        code: code.clone(),
        state,
        members: BTreeMap::new(),
        resume_tokens: HashMap::new(),
        clock: Clock::default(),
        phase,
        report: None,
        persisted: false,
        ctx,
    };
    tokio::spawn(actor.run(rx));
    GameHandle { code, admin_token, commands, phase: phase_rx }
}

impl GameActor {
    async fn run(mut self, mut rx: mpsc::UnboundedReceiver<GameCommand>) {
        let mut ticker = tokio::time::interval(SNAPSHOT_INTERVAL);
        ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);
        let mut deadline = Instant::now() + self.ctx.idle_timeout;
        loop {
            tokio::select! {
                cmd = rx.recv() => {
                    let Some(cmd) = cmd else { break };
                    deadline = Instant::now() + self.ctx.idle_timeout;
                    self.handle(cmd);
                    self.phase.send_if_modified(|p| {
                        let now = PhaseHint::from(self.state.phase());
                        std::mem::replace(p, now) != now
                    });
                    if self.state.phase().is_finished() && self.persisted && self.members.is_empty() {
                        break;
                    }
                }
                _ = ticker.tick() => {
                    if self.state.phase().is_running() {
                        self.send_snapshot();
                    }
                }
                _ = sleep_until(deadline) => {
                    self.expire();
                    break;
                }
            }
        }
        self.ctx.registry.lock().expect("registry lock").remove(&self.code);
        tracing::info!(game = %self.code, "game closed");
    }

    fn handle(&mut self, cmd: GameCommand) {
        match cmd {
            GameCommand::Join { conn, name, out, reply } => {
                let now = self.clock.now();
                match self.state.join_player(&name, now) {
                    Ok((player, events)) => {
                        let token = new_secret(&mut OsRng);
                        self.resume_tokens.insert(token.clone(), player);
                        let joined = self.joined(player, token);
                        let _ = out.send(ToClient::Message(joined.into()));
                        self.members.insert(conn, Member { role: Role::Player(player), out });
                        let _ = reply.send(Ok(player));
                        self.dispatch(&events, now);
                    }
                    Err(e) => {
                        let _ = reply.send(Err(engine_error(&e)));
                    }
                }
            }
            GameCommand::Resume { conn, token, out, reply } => {
                let Some(&player) = self.resume_tokens.get(&token) else {
                    let _ = reply.send(Err(error_msg("unknown_resume_token", "no player holds that resume token")));
                    return;
                };
                self.members.retain(|_, m| {
                    if m.role == Role::Player(player) {
                        let superseded = error_msg("superseded", "this player resumed on another connection");
                        let _ = m.out.send(ToClient::Close(Payload::Error(superseded)));
                        false
                    } else {
                        true
                    }
                });
                let _ = out.send(ToClient::Message(self.joined(player, token).into()));
                match self.state.phase() {
                    p if p.is_lobby() => {
                        let _ = out.send(ToClient::Message(lobby_update_for(&self.state, &self.code).into()));
                    }
                    _ => {
                        let _ = out.send(ToClient::Message(game_started_for(&self.state).into()));
                        if self.state.phase().is_finished() {
                            let over = GameOver { winner: self.state.winner(), reason: self.end_reason() };
                            let _ = out.send(ToClient::Message(over.into()));
                        }
                    }
                }
                self.members.insert(conn, Member { role: Role::Player(player), out });
                let _ = reply.send(Ok(player));
                let now = self.clock.now();
                if let Ok(events) = self.state.set_connected(player, true, now) {
                    self.dispatch(&events, now);
                }
            }
            GameCommand::Watch { conn, out } => {
                let _ = out.send(ToClient::Message(lobby_update_for(&self.state, &self.code).into()));
                let _ = out.send(ToClient::Message(snapshot_for(&self.state, &self.code).into()));
                if let Some(report) = &self.report {
                    let _ = out.send(ToClient::Message(ReportMsg { report: report.clone() }.into()));
                }
                self.members.insert(conn, Member { role: Role::Admin, out });
            }
            GameCommand::Input { conn, payload } => self.input(conn, payload),
            GameCommand::Detach { conn } => {
                let Some(member) = self.members.remove(&conn) else { return };
                let Role::Player(player) = member.role else { return };
                let now = self.clock.now();
                let result = if self.state.phase().is_lobby() {
                    self.resume_tokens.retain(|_, p| *p != player);
                    self.state.leave_player(player, now)
                } else {
                    self.state.set_connected(player, false, now)
                };
                if let Ok(events) = result {
                    self.dispatch(&events, now);
                }
            }
        }
    }

    fn input(&mut self, conn: ConnId, payload: Payload) {
        let Some(role) = self.members.get(&conn).map(|m| m.role) else { return };
        let now = self.clock.now();
        let result = match (role, payload) {
            (Role::Player(p), Payload::SelectTeam(m)) => self.state.select_team(p, m.team, now),
            (Role::Player(p), Payload::Move(m)) => self.state.handle_move(p, m.dir, now),
            (Role::Player(p), Payload::Interact(_)) => self.state.handle_interact(p, now),
            (Role::Player(p), Payload::Answer(m)) => self.state.handle_answer(p, &m.task_id, &m.submission, now),
            (Role::Player(p), Payload::CancelQuestion(_)) => self.state.handle_cancel(p, now),
            (Role::Admin, Payload::AdminLoadBank(m)) => {
                let result = self.state.replace_bank(m.bank.clone(), now);
                if let (Ok(_), Some(name)) = (&result, &m.save_as) {
                    if let Err(e) = self.ctx.library.save_bank(name, &m.bank) {
                        self.send(conn, Payload::Error(error_msg("io_failure", e)));
                    }
                }
                result
            }
            (Role::Admin, Payload::AdminStart(_)) => self.state.start_game(now),
            (Role::Admin, Payload::AdminEnd(_)) => {
                if let Err(e) = self.conclude(now, EndReason::AdminEnd) {
                    self.send(conn, Payload::Error(engine_error(&e)));
                }
                return;
            }
            (_, other) => {
                let message = format!("role: {} is not accepted from this session", other.type_name());
                self.send(conn, Payload::Error(error_msg("rejected", message)));
                return;
            }
        };
        match result {
            Ok(events) => self.dispatch(&events, now),
            Err(e) => self.send(conn, Payload::Error(engine_error(&e))),
        }
    }

    fn joined(&self, player: PlayerId, resume_token: String) -> Joined {
        let name = self.state.player(player).map(|p| p.name.clone()).unwrap_or_default();
        Joined { game_code: self.code.clone(), player_id: player, resume_token, name }
    }

    fn end_reason(&self) -> EndReason {
        match self.state.phase() {
            spacerace_core::engine::Phase::Finished { reason, .. } => reason,
            _ => EndReason::AdminEnd,
        }
    }

    /// Routes engine events in order. A winning answer ends the game, which
    /// finalizes and publishes the report straight away.
    fn dispatch(&mut self, events: &[Event], now: u64) {
        let mut won = false;
        for event in events {
            if let Some((audience, payload)) = route_event(&self.state, &self.code, event) {
                self.deliver(audience, payload);
            }
            match event {
                Event::TaskListUpdate { .. } => self.send_snapshot(),
                Event::GameOver { reason: EndReason::NaturalEnd, .. } => won = true,
                _ => {}
            }
        }
        if won {
            let _ = self.conclude(now, EndReason::NaturalEnd);
        }
    }

    fn conclude(&mut self, now: u64, reason: EndReason) -> Result<(), EngineError> {
        let (report, events) = self.state.finalize(now, reason)?;
        for event in &events {
            if let Some((audience, payload)) = route_event(&self.state, &self.code, event) {
                self.deliver(audience, payload);
            }
        }
        if !events.is_empty() {
            self.send_snapshot();
        }
        if !self.persisted || self.report.as_ref() != Some(&report) {
            match self.ctx.library.persist_report(&self.code, &report) {
                Ok(path) => {
                    self.persisted = true;
                    tracing::info!(game = %self.code, path = %path.display(), "report written");
                }
                Err(e) => {
                    tracing::error!(game = %self.code, error = %e, "report not written");
                    self.deliver(Audience::Admins, Payload::Error(error_msg("io_failure", e)));
                }
            }
        }
        self.report = Some(report.clone());
        self.deliver(Audience::Admins, ReportMsg { report }.into());
        Ok(())
    }

    fn expire(&mut self) {
        tracing::info!(game = %self.code, "idle timeout");
        if self.state.phase().is_running() {
            let now = self.clock.now();
            let _ = self.conclude(now, EndReason::AdminEnd);
        }
        for member in self.members.values() {
            let _ = member
                .out
                .send(ToClient::Close(Payload::Error(error_msg("idle_timeout", "game closed after inactivity"))));
        }
        if let (Some(report), false) = (&self.report, self.persisted) {
            self.ctx.unsaved_reports.lock().expect("report lock").push((self.code.clone(), report.clone()));
        }
    }

    fn send_snapshot(&mut self) {
        if self.members.values().any(|m| m.role == Role::Admin) {
            self.deliver(Audience::Admins, snapshot_for(&self.state, &self.code).into());
        }
    }

    fn send(&self, conn: ConnId, payload: Payload) {
        if let Some(m) = self.members.get(&conn) {
            let _ = m.out.send(ToClient::Message(payload));
        }
    }

    fn deliver(&self, audience: Audience, payload: Payload) {
        for member in self.members.values() {
            let addressed = match (audience, member.role) {
                (Audience::Everyone | Audience::Roster, _) => true,
                (Audience::Admins, role) => role == Role::Admin,
                (Audience::Player(p), role) => role == Role::Player(p),
                (Audience::Team(t), Role::Player(p)) => self.state.player(p).is_some_and(|pl| pl.team == Some(t)),
                (Audience::Team(_), Role::Admin) => false,
            };
            if addressed {
                let _ = member.out.send(ToClient::Message(payload.clone()));
            }
        }
    }
}
