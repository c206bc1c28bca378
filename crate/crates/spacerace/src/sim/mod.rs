//! Bot harness: plays whole games against a running server over real
//! sockets and checks the rules that are visible on the wire.

mod bank;
mod bot;
mod client;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use spacerace_core::engine::{EndReason, Phase, PlayerId, SupervisionSnapshot, TaskStatus, TeamIndex};
use spacerace_core::protocol::{
    AdminCreateGame, AdminGame, GameCreated, GameOver, GameRequest, Join, Payload, SelectTeam, WireMessage,
};
use spacerace_core::question::QuestionBank;
use spacerace_core::Report;
use tokio::time::Instant;

pub use bank::practice_bank;
pub use bot::{build_submission, Action, Bot, BotSetup, BotStats, MOVE_INTERVAL_MILLIS};
pub use client::{Client, ServerAddr};

/// How many recent messages an error keeps for diagnosis.
const EXCERPT_LEN: usize = 12;
/// Allowance for connecting, joining and team selection.
const SETUP_ALLOWANCE_MILLIS: u64 = 15_000;

#[derive(Debug, Clone, clap::Parser, Serialize)]
#[command(name = "spacerace-sim", version, about = "Plays SpaceRace games with scripted bots and checks the wire")]
#[serde(rename_all = "camelCase")]
pub struct SimConfig {
    /// ws://host:port/ws or tcp://host:port
    #[arg(long)]
    #[serde(serialize_with = "as_display")]
    pub server: ServerAddr,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub teams: u8,
    /// Bots per team.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u8).range(1..=10))]
    pub players: u8,
    /// Tasks per team.
    #[arg(long, default_value_t = 8)]
    pub tasks: u32,
    /// Chance that a bot's first attempt at a task is correct.
    #[arg(long, default_value_t = 0.7)]
    pub accuracy: f64,
    /// Pause before answering and after each verdict.
    #[arg(long, default_value_t = 0)]
    pub think_millis: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub games: u32,
    /// Run the games at the same time instead of one after another.
    #[arg(long)]
    pub parallel: bool,
    #[arg(long, default_value_t = spacerace_core::engine::DEFAULT_COOLDOWN_MILLIS)]
    pub cooldown_millis: u64,
    /// Bank file to upload; a generated bank is used when absent.
    #[arg(long)]
    pub bank: Option<PathBuf>,
    /// Map name in the server's map library.
    #[arg(long)]
    pub map: Option<String>,
    /// Have the admin end the game once this many tasks are completed.
    #[arg(long)]
    pub admin_end_after: Option<u32>,
    /// Per-game wall-clock bound; derived from the settings when absent.
    #[arg(long)]
    pub timeout_millis: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Keep every raw frame each bot receives, for auditing.
    #[arg(skip)]
    #[serde(skip)]
    pub keep_transcripts: bool,
}

fn as_display<S: serde::Serializer, T: std::fmt::Display>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl SimConfig {
    pub fn new(server: ServerAddr) -> Self {
        Self {
            server,
            teams: 4,
            players: 10,
            tasks: 8,
            accuracy: 0.7,
            think_millis: 0,
            seed: 42,
            games: 1,
            parallel: false,
            cooldown_millis: spacerace_core::engine::DEFAULT_COOLDOWN_MILLIS,
            bank: None,
            map: None,
            admin_end_after: None,
            timeout_millis: None,
            out: None,
            keep_transcripts: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.into()));
        if !(1..=4).contains(&self.teams) {
            return bad("teams must be within 1..4");
        }
        if !(1..=10).contains(&self.players) {
            return bad("players must be within 1..10");
        }
        if !(0.0..=1.0).contains(&self.accuracy) {
            return bad("accuracy must be within 0..1");
        }
        if self.games == 0 {
            return bad("games must be at least 1");
        }
        if self.tasks == 0 {
            return bad("tasks must be at least 1");
        }
        Ok(())
    }

    /// Default bound: per task, one cooldown, two think pauses and a long
    /// walk across the default map, times a safety factor of three.
    pub fn timeout(&self) -> Duration {
        let map = spacerace_core::WorldMap::default_map();
        let path = u64::from(map.width() + map.height()) * MOVE_INTERVAL_MILLIS;
        let per_task = self.cooldown_millis + 2 * self.think_millis + path;
        let derived = u64::from(self.tasks) * per_task * 3 + SETUP_ALLOWANCE_MILLIS;
        Duration::from_millis(self.timeout_millis.unwrap_or(derived))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation settings: {0}")]
    InvalidConfig(String),
    #[error("cannot connect to {addr}: {reason}")]
    ConnectFailure { addr: String, reason: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("protocol failure: {0}")]
    Protocol(String),
    #[error("{context} refused with {code}: {message}")]
    Rejected { context: String, code: String, message: String },
    #[error("game not finished within {millis} ms; recent messages: {excerpt:?}")]
    Timeout { millis: u64, excerpt: Vec<String> },
    #[error("bank: {0}")]
    Bank(String),
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Assertion {
    pub name: &'static str,
    pub passed: bool,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Assertion {
    fn check(name: &'static str, failures: Vec<String>) -> Self {
        Self { name, passed: failures.is_empty(), detail: failures.join("; ") }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LatencyStats {
    pub samples: usize,
    pub p50_millis: u64,
    pub p99_millis: u64,
    pub max_millis: u64,
}

impl LatencyStats {
    /// Nearest-rank percentiles.
    pub fn from_samples(samples: &[u64]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let rank = |p: f64| -> u64 {
            if sorted.is_empty() {
                return 0;
            }
            let k = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
            sorted[k - 1]
        };
        Self { samples: sorted.len(), p50_millis: rank(0.50), p99_millis: rank(0.99), max_millis: rank(1.0) }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BotSummary {
    pub bot: usize,
    pub player_id: PlayerId,
    pub team: TeamIndex,
    #[serde(flatten)]
    pub stats: BotStats,
    pub messages_sent: u64,
    pub messages_received: u64,
    /// Raw frames, kept only when asked for.
    #[serde(skip)]
    pub transcript: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GameSummary {
    pub game_code: String,
    pub seed: u64,
    pub winner: Option<TeamIndex>,
    pub end_reason: EndReason,
    pub duration_millis: u64,
    pub messages_sent: u64,
    pub messages_received: u64,
    pub latency: LatencyStats,
    pub assertions: Vec<Assertion>,
    pub bots: Vec<BotSummary>,
    pub report: Report,
}

impl GameSummary {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SimReport {
    pub config: SimConfig,
    pub games: Vec<GameSummary>,
    pub latency: LatencyStats,
    pub passed: bool,
}

fn epoch_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Remembers the last few messages a client saw.
#[derive(Debug, Default)]
struct Excerpt(std::collections::VecDeque<String>);

impl Excerpt {
    fn push(&mut self, who: &str, m: &WireMessage) {
        if self.0.len() == EXCERPT_LEN {
            self.0.pop_front();
        }
        self.0.push_back(format!("{who} <- {}#{}", m.payload.type_name(), m.seq));
    }
}

/// Receives until `pick` accepts a message, feeding every message to `seen`.
async fn wait_for<T>(
    client: &mut Client,
    deadline: Instant,
    context: &str,
    mut seen: impl FnMut(&WireMessage),
    mut pick: impl FnMut(&Payload) -> Option<T>,
) -> Result<T, SimError> {
    loop {
        let message = match tokio::time::timeout_at(deadline, client.recv()).await {
            Err(_) => return Err(SimError::Timeout { millis: 0, excerpt: vec![format!("waiting for {context}")] }),
            Ok(r) => r?.ok_or_else(|| SimError::Protocol(format!("connection closed while waiting for {context}")))?,
        };
        seen(&message);
        if let Some(found) = pick(&message.payload) {
            return Ok(found);
        }
        if let Payload::Error(e) = &message.payload {
            return Err(SimError::Rejected {
                context: context.into(),
                code: e.code.clone(),
                message: e.message.clone(),
            });
        }
    }
}

pub async fn run_simulation(config: SimConfig) -> Result<SimReport, SimError> {
    config.validate()?;
    let bank = match &config.bank {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| SimError::Bank(format!("{}: {e}", path.display())))?;
            spacerace_core::load_bank(&bytes).map_err(|e| SimError::Bank(e.to_string()))?
        }
        None => practice_bank(config.tasks.max(8) as usize),
    };
    let bank = Arc::new(bank);
    let seeds: Vec<u64> = (0..config.games).map(|g| config.seed.wrapping_add(u64::from(g))).collect();
    let games = if config.parallel {
        futures::future::try_join_all(seeds.iter().map(|&s| run_game(&config, bank.clone(), s))).await?
    } else {
        let mut games = Vec::new();
        for &s in &seeds {
            games.push(run_game(&config, bank.clone(), s).await?);
        }
        games
    };
    let all: Vec<u64> =
        games.iter().flat_map(|g| g.bots.iter().flat_map(|b| b.stats.latencies.iter().copied())).collect();
    let passed = games.iter().all(GameSummary::passed);
    Ok(SimReport { latency: LatencyStats::from_samples(&all), passed, games, config })
}

struct BotRun {
    bot: Bot,
    sent: u64,
    received: u64,
    transcript: Vec<String>,
}

/// One full game: create, fill, start, play to the end, collect the report
/// twice and check the transcripts.
pub async fn run_game(config: &SimConfig, bank: Arc<QuestionBank>, seed: u64) -> Result<GameSummary, SimError> {
    let started = Instant::now();
    let bound = config.timeout();
    let deadline = started + bound;
    let timeout = |excerpt: &Excerpt| SimError::Timeout {
        millis: bound.as_millis() as u64,
        excerpt: excerpt.0.iter().cloned().collect(),
    };
    let mut excerpt = Excerpt::default();

    let mut admin = Client::connect(&config.server).await?;
    let request = GameRequest {
        teams: config.teams,
        max_players_per_team: config.players,
        tasks_per_team: config.tasks,
        cooldown_millis: config.cooldown_millis,
        energy_per_task: 1,
        rng_seed: Some(seed),
        map_name: config.map.clone(),
    };
    admin.send(AdminCreateGame { config: request, bank_name: None, bank: Some((*bank).clone()) }).await?;
    let GameCreated { game_code, admin_token } = wait_for(
        &mut admin,
        deadline,
        "admin_create_game",
        |m| excerpt.push("admin", m),
        |p| match p {
            Payload::GameCreated(g) => Some(g.clone()),
            _ => None,
        },
    )
    .await?;
    let credentials = AdminGame { game_code: game_code.clone(), admin_token };

    let total_bots = usize::from(config.teams) * usize::from(config.players);
    let mut sessions = Vec::with_capacity(total_bots);
    for i in 0..total_bots {
        let setup = BotSetup {
            bot_index: i,
            team: (i % usize::from(config.teams)) as TeamIndex,
            index_in_team: i / usize::from(config.teams),
            team_size: usize::from(config.players),
            accuracy: config.accuracy,
            think_millis: config.think_millis,
            cooldown_millis: config.cooldown_millis,
            seed,
        };
        let server = config.server.clone();
        let code = game_code.clone();
        let bank = bank.clone();
        let keep = config.keep_transcripts;
        sessions
            .push(tokio::spawn(async move { bot_session(server, code, Bot::new(setup, bank), deadline, keep).await }));
    }

    // Start once the roster shows every bot on a team.
    wait_for(
        &mut admin,
        deadline,
        "a full roster",
        |m| excerpt.push("admin", m),
        |p| match p {
            Payload::LobbyUpdate(l) if l.players.len() == total_bots && l.players.iter().all(|e| e.team.is_some()) => {
                Some(())
            }
            _ => None,
        },
    )
    .await?;
    admin.send(Payload::AdminStart(credentials.clone())).await?;

    let mut snapshots: Vec<SupervisionSnapshot> = Vec::new();
    let mut admin_overs: Vec<GameOver> = Vec::new();
    let mut admin_errors: Vec<String> = Vec::new();
    let mut reports: Vec<Report> = Vec::new();
    let mut end_sent = false;
    while reports.len() < 2 {
        let message = match tokio::time::timeout_at(deadline, admin.recv()).await {
            Err(_) => return Err(timeout(&excerpt)),
            Ok(r) => r?.ok_or_else(|| SimError::Protocol("admin connection closed".into()))?,
        };
        excerpt.push("admin", &message);
        match message.payload {
            Payload::Snapshot(s) => {
                let done: u32 = s.snapshot.teams.iter().map(|t| t.completed).sum();
                snapshots.push(s.snapshot);
                if let Some(after) = config.admin_end_after {
                    if !end_sent && done >= after && admin_overs.is_empty() {
                        admin.send(Payload::AdminEnd(credentials.clone())).await?;
                        end_sent = true;
                    }
                }
            }
            Payload::GameOver(g) => admin_overs.push(g),
            Payload::Report(r) => {
                reports.push(r.report);
                if reports.len() == 1 {
                    // Finalizing again must give back the same report.
                    admin.send(Payload::AdminEnd(credentials.clone())).await?;
                }
            }
            Payload::Error(e) => admin_errors.push(format!("{}: {}", e.code, e.message)),
            _ => {}
        }
    }

    let mut runs = Vec::with_capacity(total_bots);
    for session in sessions {
        let run = session.await.map_err(|e| SimError::Protocol(format!("bot task failed: {e}")))??;
        runs.push(run);
    }
    let (admin_sent, admin_received) = (admin.sent, admin.received);
    admin.close().await;
    let duration = started.elapsed();

    let report = reports[0].clone();
    let over = admin_overs.first().copied();
    let assertions = check_game(config, &runs, &admin_overs, &admin_errors, &snapshots, &reports);
    let latencies: Vec<u64> = runs.iter().flat_map(|r| r.bot.stats.latencies.iter().copied()).collect();
    let bots: Vec<BotSummary> = runs
        .iter()
        .map(|r| BotSummary {
            bot: r.bot.setup().bot_index,
            player_id: r.bot.player().unwrap_or(PlayerId(u32::MAX)),
            team: r.bot.setup().team,
            stats: r.bot.stats.clone(),
            messages_sent: r.sent,
            messages_received: r.received,
            transcript: r.transcript.clone(),
        })
        .collect();
    Ok(GameSummary {
        game_code,
        seed,
        winner: over.and_then(|o| o.winner),
        end_reason: over.map_or(report.end_reason, |o| o.reason),
        duration_millis: duration.as_millis() as u64,
        messages_sent: admin_sent + runs.iter().map(|r| r.sent).sum::<u64>(),
        messages_received: admin_received + runs.iter().map(|r| r.received).sum::<u64>(),
        latency: LatencyStats::from_samples(&latencies),
        assertions,
        bots,
        report,
    })
}

async fn bot_session(
    server: ServerAddr,
    code: String,
    mut bot: Bot,
    deadline: Instant,
    keep_transcript: bool,
) -> Result<BotRun, SimError> {
    let mut client = Client::connect(&server).await?;
    if keep_transcript {
        client.keep_transcript();
    }
    let index = bot.setup().bot_index;
    let team = bot.setup().team;
    let mut excerpt = Excerpt::default();
    let who = format!("bot-{index}");

    client.send(Join { game_code: code, name: who.clone() }).await?;
    wait_for(
        &mut client,
        deadline,
        "join",
        |m| {
            excerpt.push(&who, m);
            bot.observe(&m.payload, epoch_millis());
        },
        |p| matches!(p, Payload::Joined(_)).then_some(()),
    )
    .await?;
    let me = bot.player();
    client.send(SelectTeam { team }).await?;
    wait_for(
        &mut client,
        deadline,
        "select_team",
        |m| {
            excerpt.push(&who, m);
            bot.observe(&m.payload, epoch_millis());
        },
        |p| match p {
            Payload::LobbyUpdate(l) => {
                l.players.iter().any(|e| Some(e.player_id) == me && e.team == Some(team)).then_some(())
            }
            _ => None,
        },
    )
    .await?;

    loop {
        let now = epoch_millis();
        let wake = match bot.next_action(now) {
            Action::Done => break,
            Action::Send(payload) => {
                client.send(payload).await?;
                continue;
            }
            Action::WaitUntil(at) => Some(Instant::now() + Duration::from_millis(at.saturating_sub(now))),
            Action::Idle => None,
        };
        let wake = wake.map_or(deadline, |w| w.min(deadline));
        tokio::select! {
            received = client.recv() => {
                let message = received?.ok_or_else(|| SimError::Protocol(format!("{who}: connection closed mid-game")))?;
                excerpt.push(&who, &message);
                bot.observe(&message.payload, epoch_millis());
            }
            _ = tokio::time::sleep_until(wake) => {
                if Instant::now() >= deadline {
                    return Err(SimError::Timeout { millis: 0, excerpt: excerpt.0.into_iter().collect() });
                }
            }
        }
    }
    let (sent, received) = (client.sent, client.received);
    let transcript = client.transcript().to_vec();
    client.close().await;
    Ok(BotRun { bot, sent, received, transcript })
}

fn phase_rank(p: &Phase) -> u8 {
    match p {
        Phase::Lobby => 0,
        Phase::Running { .. } => 1,
        Phase::Finished { .. } => 2,
    }
}

fn check_game(
    config: &SimConfig,
    runs: &[BotRun],
    admin_overs: &[GameOver],
    admin_errors: &[String],
    snapshots: &[SupervisionSnapshot],
    reports: &[Report],
) -> Vec<Assertion> {
    let report = &reports[0];
    let mut out = Vec::new();

    let mut f = Vec::new();
    if admin_overs.len() != 1 {
        f.push(format!("admin saw {} game_over messages", admin_overs.len()));
    }
    for r in runs {
        if r.bot.stats.game_overs != 1 {
            f.push(format!("bot-{} saw {} game_over messages", r.bot.setup().bot_index, r.bot.stats.game_overs));
        }
    }
    out.push(Assertion::check("single_game_over", f));

    let mut f = Vec::new();
    let over = admin_overs.first().copied();
    for r in runs {
        if r.bot.game_over() != over {
            f.push(format!("bot-{} saw {:?}, admin saw {:?}", r.bot.setup().bot_index, r.bot.game_over(), over));
        }
    }
    if let Some(o) = over {
        if report.winner != o.winner || report.end_reason != o.reason {
            f.push(format!("report says {:?}/{:?}", report.winner, report.end_reason));
        }
        match (config.admin_end_after, o.winner) {
            (None, None) => f.push("natural game ended without a winner".into()),
            (None, Some(w)) => {
                let incomplete = report.tasks.iter().filter(|t| t.team == w && t.completed_by.is_none()).count();
                if incomplete > 0 {
                    f.push(format!("winner {w} still has {incomplete} open tasks"));
                }
            }
            (Some(_), winner) => {
                if winner.is_some() || o.reason != EndReason::AdminEnd {
                    f.push(format!("forced end gave {:?}/{:?}", winner, o.reason));
                }
            }
        }
    }
    out.push(Assertion::check("one_winner_agreed", f));

    let f = runs
        .iter()
        .flat_map(|r| r.bot.stats.violations.iter().map(move |v| format!("bot-{}: {v}", r.bot.setup().bot_index)))
        .collect();
    out.push(Assertion::check("monotone_task_updates", f));

    let mut f = Vec::new();
    let energy_per_task = u64::from(report.config.energy_per_task);
    for (i, pair) in snapshots.windows(2).enumerate() {
        if phase_rank(&pair[1].phase) < phase_rank(&pair[0].phase) {
            f.push(format!("snapshot {} went back to {:?}", i + 1, pair[1].phase));
        }
        for (a, b) in pair[0].teams.iter().zip(&pair[1].teams) {
            if b.completed < a.completed {
                f.push(format!("snapshot {}: team {} completed {} -> {}", i + 1, b.team, a.completed, b.completed));
            }
        }
    }
    for (i, s) in snapshots.iter().enumerate() {
        for t in &s.teams {
            let done = t.tasks.iter().filter(|x| matches!(x.status, TaskStatus::Completed { .. })).count() as u32;
            if done != t.completed
                || t.total as usize != t.tasks.len()
                || t.energy != u64::from(t.completed) * energy_per_task
            {
                f.push(format!("snapshot {i}: team {} counts disagree", t.team));
            }
        }
    }
    if !snapshots.last().is_some_and(|s| s.phase.is_finished()) {
        f.push("no snapshot of the finished game".into());
    }
    out.push(Assertion::check("consistent_snapshots", f));

    let f = if reports.windows(2).all(|w| w[0] == w[1]) {
        Vec::new()
    } else {
        vec!["second finalization changed the report".into()]
    };
    out.push(Assertion::check("report_idempotent", f));

    let mut f = Vec::new();
    for r in runs {
        let id = r.bot.player();
        match report.players.iter().find(|p| Some(p.player_id) == id) {
            Some(p) if p.submissions == r.bot.stats.attempts && p.correct_submissions == r.bot.stats.corrects => {}
            Some(p) => f.push(format!(
                "bot-{}: report {}/{} vs wire {}/{}",
                r.bot.setup().bot_index,
                p.correct_submissions,
                p.submissions,
                r.bot.stats.corrects,
                r.bot.stats.attempts
            )),
            None => f.push(format!("bot-{} missing from the report", r.bot.setup().bot_index)),
        }
    }
    out.push(Assertion::check("report_matches_bots", f));

    let mut f: Vec<String> = admin_errors.iter().map(|e| format!("admin: {e}")).collect();
    for r in runs {
        if r.bot.stats.error_frames > 0 {
            f.push(format!("bot-{}: {:?}", r.bot.setup().bot_index, r.bot.stats.surprises));
        }
    }
    out.push(Assertion::check("no_error_frames", f));
    out
}
