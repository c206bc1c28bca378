//! Randomized engine sessions. Every step goes through [`Run::exec`], which
//! checks the engine's laws against the state before and after the step and
//! against a small model kept on the side (cooldowns, attempts, first team to
//! finish). The recorded inputs are replayed at the end to check determinism.

use std::collections::BTreeMap;

use proptest::collection::vec;
use proptest::prelude::*;

use spacerace_core::engine::{
    EndReason, EngineError, Event, GameConfig, GameState, Phase, PlayerId, TeamIndex, MAX_MOVES_PER_WINDOW,
    MAX_PLAYERS_PER_TEAM, MAX_TEAMS, MOVE_WINDOW_MILLIS,
};
use spacerace_core::grading::{Submission, Verdict};
use spacerace_core::question::{QuestionBank, QuestionBody, Token};
use spacerace_core::world::{Cell, Direction, MapFile, StationDef, WorldMap};

use crate::{gen, oracle};

/// One engine input, as recorded for replay.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Join(String),
    SelectTeam(PlayerId, TeamIndex),
    Leave(PlayerId),
    Start,
    Move(PlayerId, Direction),
    Interact(PlayerId),
    Answer(PlayerId, String, Submission),
    Cancel(PlayerId),
    Connected(PlayerId, bool),
    Finalize(EndReason),
}

pub fn apply(state: &mut GameState, op: &Op, now: u64) -> Result<Vec<Event>, EngineError> {
    match op {
        Op::Join(name) => state.join_player(name, now).map(|(_, events)| events),
        Op::SelectTeam(p, team) => state.select_team(*p, *team, now),
        Op::Leave(p) => state.leave_player(*p, now),
        Op::Start => state.start_game(now),
        Op::Move(p, dir) => state.handle_move(*p, *dir, now),
        Op::Interact(p) => state.handle_interact(*p, now),
        Op::Answer(p, task, submission) => state.handle_answer(*p, task, submission, now),
        Op::Cancel(p) => state.handle_cancel(*p, now),
        Op::Connected(p, connected) => state.set_connected(*p, *connected, now),
        Op::Finalize(reason) => state.finalize(now, *reason).map(|(_, events)| events),
    }
}

/// Scenario-level intent; players are picked by index modulo the roster.
#[derive(Debug, Clone)]
pub enum Action {
    Join,
    SelectTeam {
        player: usize,
        team: TeamIndex,
    },
    Leave {
        player: usize,
    },
    Start,
    Move {
        player: usize,
        dir: Direction,
    },
    /// Walk the shortest path to the station of one of the team's tasks.
    Seek {
        player: usize,
        task: usize,
    },
    Interact {
        player: usize,
    },
    Answer {
        player: usize,
        correct: bool,
    },
    /// Seek, interact, and answer if a question opened.
    Attempt {
        player: usize,
        task: usize,
        correct: bool,
    },
    /// Seek and interact, leaving the question open.
    Open {
        player: usize,
        task: usize,
    },
    /// Answer the open question with a token from nowhere.
    Forge {
        player: usize,
    },
    Cancel {
        player: usize,
    },
    Reconnect {
        player: usize,
    },
    AdminEnd,
}

#[derive(Debug, Clone)]
pub struct Step {
    pub dt: u64,
    pub action: Action,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: GameConfig,
    pub bank: QuestionBank,
    pub map: WorldMap,
    /// Team picked by each player joining before the first start attempt.
    /// Values past the configured team count exercise `NoSuchTeam`.
    pub seats: Vec<TeamIndex>,
    pub steps: Vec<Step>,
}

/// Counters that show how much of the engine a batch of scenarios reached.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Coverage {
    pub ops: u64,
    pub rejected: u64,
    pub started: bool,
    pub presented: u64,
    pub correct: u64,
    pub incorrect: u64,
    pub cooldown_hits: u64,
    pub already_completed: u64,
    pub natural_end: bool,
    pub admin_end: bool,
}

/// Open floor with three stations in a row; every cell is in reach of one.
pub fn corridor_map() -> WorldMap {
    WorldMap::try_from(MapFile {
        width: 7,
        height: 3,
        blocked: vec![Cell::new(6, 1)],
        stations: vec![
            StationDef { id: 10, cell: Cell::new(1, 1) },
            StationDef { id: 11, cell: Cell::new(3, 1) },
            StationDef { id: 12, cell: Cell::new(5, 1) },
        ],
        spawns: [vec![Cell::new(0, 0)], vec![Cell::new(6, 0)], vec![Cell::new(0, 2)], vec![Cell::new(6, 2)]],
    })
    .expect("corridor map is valid")
}

fn action() -> impl Strategy<Value = Action> {
    let p = 0usize..16;
    prop_oneof![
        1 => Just(Action::Join),
        1 => (p.clone(), 0u8..5).prop_map(|(player, team)| Action::SelectTeam { player, team }),
        1 => p.clone().prop_map(|player| Action::Leave { player }),
        1 => Just(Action::Start),
        3 => (p.clone(), gen::direction()).prop_map(|(player, dir)| Action::Move { player, dir }),
        5 => (p.clone(), 0usize..8).prop_map(|(player, task)| Action::Seek { player, task }),
        6 => p.clone().prop_map(|player| Action::Interact { player }),
        6 => (p.clone(), any::<bool>()).prop_map(|(player, correct)| Action::Answer { player, correct }),
        8 => (p.clone(), 0usize..8, prop::bool::weighted(0.6))
            .prop_map(|(player, task, correct)| Action::Attempt { player, task, correct }),
        3 => (p.clone(), 0usize..8).prop_map(|(player, task)| Action::Open { player, task }),
        1 => p.clone().prop_map(|player| Action::Forge { player }),
        1 => p.clone().prop_map(|player| Action::Cancel { player }),
        1 => p.clone().prop_map(|player| Action::Reconnect { player }),
        1 => Just(Action::AdminEnd),
    ]
}

fn step() -> impl Strategy<Value = Step> {
    let dt = prop_oneof![3 => 0u64..400, 1 => 400u64..12_000];
    (dt, action()).prop_map(|(dt, action)| Step { dt, action })
}

fn map_choice() -> impl Strategy<Value = WorldMap> {
    prop_oneof![
        2 => Just(corridor_map()),
        1 => Just(WorldMap::default_map()),
        2 => gen::world_map(),
    ]
}

pub fn scenario() -> impl Strategy<Value = Scenario> {
    (gen::bank(1..=8), map_choice(), 1u8..=MAX_TEAMS, 1u8..=MAX_PLAYERS_PER_TEAM)
        .prop_flat_map(|(bank, map, teams, max)| {
            let tasks = 1..=bank.len().min(6) as u32;
            let cooldown = prop_oneof![Just(0u64), Just(300), Just(2_000), Just(10_000)];
            (
                Just((bank, map, teams, max)),
                tasks,
                cooldown,
                1u32..=3,
                any::<u64>(),
                vec(prop_oneof![30 => 0..teams, 1 => Just(MAX_TEAMS)], 0..=12),
                vec(step(), 0..80),
            )
        })
        .prop_map(|((bank, map, teams, max), tasks, cooldown, energy, seed, seats, steps)| {
            let mut config = GameConfig::new(teams, max, tasks, seed);
            config.cooldown_millis = cooldown;
            config.energy_per_task = energy;
            Scenario { config, bank, map, seats, steps }
        })
}

/// A live run of one scenario plus the side model used by the checks.
pub struct Run {
    pub state: GameState,
    pub trace: Vec<(Op, u64)>,
    pub results: Vec<Result<Vec<Event>, EngineError>>,
    pub now: u64,
    pub coverage: Coverage,
    players: Vec<PlayerId>,
    joined: u32,
    cooldowns: BTreeMap<(PlayerId, String), u64>,
    moves: BTreeMap<PlayerId, Vec<u64>>,
    attempts: BTreeMap<(TeamIndex, String), u32>,
    first_full: Option<TeamIndex>,
}

type Check = Result<(), String>;

fn fail<T>(msg: impl Into<String>) -> Result<T, String> {
    Err(msg.into())
}

enum ExpectInteract {
    Nothing,
    Cooling { task_id: String, expires_at: u64 },
    Present { task_id: String },
}

impl Run {
    pub fn new(s: &Scenario) -> Result<Self, String> {
        let state = GameState::create("PROP", s.config.clone(), s.bank.clone(), s.map.clone())
            .map_err(|e| format!("create rejected a valid scenario: {e}"))?;
        Ok(Run {
            state,
            trace: Vec::new(),
            results: Vec::new(),
            now: 0,
            coverage: Coverage::default(),
            players: Vec::new(),
            joined: 0,
            cooldowns: BTreeMap::new(),
            moves: BTreeMap::new(),
            attempts: BTreeMap::new(),
            first_full: None,
        })
    }

    fn pick(&self, index: usize) -> PlayerId {
        if self.players.is_empty() {
            PlayerId(u32::MAX)
        } else {
            self.players[index % self.players.len()]
        }
    }

    /// Applies one op, records it and checks every law. The inner result is
    /// the engine's own answer.
    pub fn exec(&mut self, op: Op) -> Result<Result<Vec<Event>, EngineError>, String> {
        let before = self.state.clone();
        let result = apply(&mut self.state, &op, self.now);
        self.trace.push((op.clone(), self.now));
        self.results.push(result.clone());
        self.coverage.ops += 1;
        match &result {
            Err(e) => {
                self.coverage.rejected += 1;
                if self.state != before {
                    return fail(format!("{op:?} failed with {e:?} but changed the state"));
                }
            }
            Ok(events) => {
                self.observe(&op, events)?;
                self.check_laws(&before)?;
            }
        }
        Ok(result)
    }

    fn observe(&mut self, op: &Op, events: &[Event]) -> Check {
        let cooldown = self.state.config().cooldown_millis;
        for event in events {
            match event {
                Event::QuestionPresented { player_id, question } => {
                    self.coverage.presented += 1;
                    if let Some(&until) = self.cooldowns.get(&(*player_id, question.task_id.clone())) {
                        if self.now < until {
                            return fail(format!(
                                "{} presented to {player_id} at {} before its cooldown ends at {until}",
                                question.task_id, self.now
                            ));
                        }
                    }
                }
                Event::AnswerResult { player_id, team, task_id, verdict, cooldown_until } => {
                    *self.attempts.entry((*team, task_id.clone())).or_default() += 1;
                    match verdict {
                        Verdict::Correct => {
                            self.coverage.correct += 1;
                            if cooldown_until.is_some() {
                                return fail("correct answer carried a cooldown");
                            }
                        }
                        Verdict::Incorrect => {
                            self.coverage.incorrect += 1;
                            let expected = self.now + cooldown;
                            if *cooldown_until != Some(expected) {
                                return fail(format!("cooldown until {cooldown_until:?}, expected {expected}"));
                            }
                            self.cooldowns.insert((*player_id, task_id.clone()), expected);
                        }
                    }
                }
                Event::CooldownActive { .. } => self.coverage.cooldown_hits += 1,
                Event::TaskAlreadyCompleted { .. } => self.coverage.already_completed += 1,
                Event::GameStarted { .. } => self.coverage.started = true,
                Event::GameOver { winner: Some(_), .. } => self.coverage.natural_end = true,
                Event::GameOver { reason: EndReason::AdminEnd, .. } => self.coverage.admin_end = true,
                _ => {}
            }
        }
        if let Op::Join(_) = op {
            if let Some(Event::PlayerJoined { player_id, .. }) = events.first() {
                self.players.push(*player_id);
            }
        }
        if let Op::Leave(p) = op {
            self.players.retain(|id| id != p);
        }
        Ok(())
    }

    fn check_laws(&mut self, before: &GameState) -> Check {
        let state = &self.state;
        let config = state.config();

        // Capacity.
        if state.teams().len() != config.teams as usize || config.teams > MAX_TEAMS {
            return fail("team count outside the configured bound");
        }
        for t in 0..config.teams {
            if state.team_size(t) > config.max_players_per_team as usize
                || state.team_size(t) > MAX_PLAYERS_PER_TEAM as usize
            {
                return fail(format!("team {t} holds {} players", state.team_size(t)));
            }
        }
        if state.players().count() > config.capacity() {
            return fail("more players than the game can seat");
        }

        // Fairness: identical question sequences.
        let sequence = |t: usize| state.teams()[t].tasks.iter().map(|k| k.question_id.clone()).collect::<Vec<_>>();
        if (1..state.teams().len()).any(|t| sequence(t) != sequence(0)) {
            return fail("teams hold different question lists");
        }

        for (t, team) in state.teams().iter().enumerate() {
            let completed = team.completed();
            let total = team.tasks.len() as u32;
            // Energy law and the equivalent win conditions.
            if team.energy != u64::from(config.energy_per_task) * u64::from(completed) {
                return fail(format!("team {t}: energy {} with {completed} tasks done", team.energy));
            }
            if (completed == total) != (team.energy >= config.energy_goal()) {
                return fail(format!("team {t}: win conditions disagree"));
            }
            // Monotone progress, task by task.
            let old = &before.teams()[t];
            if team.energy < old.energy || completed < old.completed() {
                return fail(format!("team {t} lost progress"));
            }
            let regressed =
                old.tasks.iter().zip(&team.tasks).any(|(a, b)| a.status.is_completed() && a.status != b.status);
            if regressed && before.phase().is_running() {
                return fail(format!("team {t}: a completed task changed"));
            }
            if completed == total && self.first_full.is_none() && state.phase().is_running() {
                return fail(format!("team {t} finished but the game is still running"));
            }
            if completed == total && old.completed() < total && before.phase().is_running() {
                match self.first_full {
                    None => self.first_full = Some(t as TeamIndex),
                    Some(first) => return fail(format!("team {t} finished after team {first} already won")),
                }
            }
        }

        // Win exactly once, by the first team to finish.
        let overs: Vec<&Event> =
            state.event_log().iter().map(|l| &l.event).filter(|e| matches!(e, Event::GameOver { .. })).collect();
        if overs.len() > 1 {
            return fail("more than one game_over");
        }
        if let Some(Event::GameOver { winner, .. }) = overs.first() {
            if *winner != self.first_full {
                return fail(format!("winner {winner:?}, first to finish {:?}", self.first_full));
            }
            if !state.phase().is_finished() {
                return fail("game_over logged but the phase is not finished");
            }
        }
        if state.winner() != self.first_full {
            return fail("phase winner differs from the first team to finish");
        }

        // The phase only moves forward.
        let rank = |p: Phase| match p {
            Phase::Lobby => 0,
            Phase::Running { .. } => 1,
            Phase::Finished { .. } => 2,
        };
        if rank(state.phase()) < rank(before.phase()) {
            return fail("phase moved backwards");
        }
        if state.phase() != before.phase() && before.phase().is_finished() {
            return fail("a finished game changed phase");
        }

        // Open questions only exist while running.
        if !state.phase().is_running() && state.players().any(|(id, _)| state.active_presentation(id).is_some()) {
            return fail("presentation open outside the running phase");
        }

        // Log is append-only with consecutive sequence numbers.
        let log = state.event_log();
        if log.len() < before.event_log().len() || log[..before.event_log().len()] != *before.event_log() {
            return fail("event log was rewritten");
        }
        if log.iter().enumerate().any(|(i, l)| l.seq != i as u64) {
            return fail("event log sequence numbers have gaps");
        }
        Ok(())
    }

    fn expected_interact(&self, player: PlayerId) -> ExpectInteract {
        let Some(p) = self.state.player(player) else { return ExpectInteract::Nothing };
        let (Some(team), Some(pos)) = (p.team, p.pos) else { return ExpectInteract::Nothing };
        let Some(station) = oracle::station_in_reach(self.state.map(), pos) else {
            return ExpectInteract::Nothing;
        };
        let pending: Vec<&str> = self.state.teams()[team as usize]
            .tasks
            .iter()
            .filter(|t| t.station_id == station && !t.status.is_completed())
            .map(|t| t.task_id.as_str())
            .collect();
        let live =
            |task: &str| self.cooldowns.get(&(player, task.to_string())).copied().filter(|&until| self.now < until);
        if let Some(task) = pending.iter().find(|t| live(t).is_none()) {
            return ExpectInteract::Present { task_id: task.to_string() };
        }
        match pending.iter().filter_map(|t| live(t).map(|e| (t, e))).min_by_key(|(_, e)| *e) {
            Some((task, expires_at)) => ExpectInteract::Cooling { task_id: task.to_string(), expires_at },
            None => ExpectInteract::Nothing,
        }
    }

    fn interact(&mut self, player: PlayerId) -> Check {
        let running = self.state.phase().is_running();
        let exists = self.state.player(player).is_some();
        let expected = self.expected_interact(player);
        let events = match self.exec(Op::Interact(player))? {
            Ok(events) => events,
            Err(EngineError::WrongPhase) if !running => return Ok(()),
            Err(EngineError::NoSuchPlayer) if !exists => return Ok(()),
            Err(e) => return fail(format!("interact failed: {e:?}")),
        };
        match (expected, events.as_slice()) {
            (ExpectInteract::Nothing, [Event::NothingHere { player_id }]) if *player_id == player => Ok(()),
            (
                ExpectInteract::Cooling { task_id, expires_at },
                [Event::CooldownActive { player_id, task_id: got, expires_at: at }],
            ) if *player_id == player && *got == task_id && *at == expires_at => Ok(()),
            (ExpectInteract::Present { task_id }, [Event::QuestionPresented { player_id, question }])
                if *player_id == player && question.task_id == task_id =>
            {
                let open = self.state.active_presentation(player).ok_or("no presentation recorded")?;
                if open.task_id != task_id || open.tokens.len() != question.body.items().len() {
                    return fail("recorded presentation does not match the question sent");
                }
                Ok(())
            }
            (_, got) => fail(format!("interact by {player} at {}: unexpected {got:?}", self.now)),
        }
    }

    fn answer(&mut self, player: PlayerId, correct: bool, forge: bool) -> Check {
        let Some(open) = self.state.active_presentation(player).cloned() else {
            let submission = Submission::Numeric { value: 0.0 };
            return match self.exec(Op::Answer(player, "T1".into(), submission))? {
                Err(_) => Ok(()),
                Ok(events) => fail(format!("answer without an open question accepted: {events:?}")),
            };
        };
        let team = self.state.player(player).and_then(|p| p.team).ok_or("presentation without a team")?;
        let task = self.state.teams()[team as usize]
            .tasks
            .iter()
            .find(|t| t.task_id == open.task_id)
            .cloned()
            .ok_or("presentation for an unknown task")?;
        let question = self.state.bank().get(&task.question_id).cloned().ok_or("task without question")?;
        let submission = if forge {
            match &question.body {
                QuestionBody::Numeric { .. } => Submission::Numeric { value: f64::NAN },
                QuestionBody::MultipleChoice { .. } => {
                    Submission::MultipleChoice { selected_tokens: vec![Token("forged!!".into())] }
                }
                QuestionBody::Ordering { .. } => Submission::Ordering { ordered_tokens: vec![Token("x".into()); 4] },
                QuestionBody::Classification { .. } => Submission::Classification { assignments: BTreeMap::new() },
            }
        } else if correct {
            oracle::correct_submission(&question, &open.tokens)
        } else {
            oracle::wrong_submission(&question, &open.tokens)
        };
        let already = task.status.is_completed();
        let result = self.exec(Op::Answer(player, open.task_id.clone(), submission))?;
        match (result, already, forge) {
            (Ok(events), true, _) => match events.as_slice() {
                [Event::TaskAlreadyCompleted { task_id, .. }] if *task_id == open.task_id => {
                    if self.state.active_presentation(player).is_some() {
                        return fail("presentation kept after task_already_completed");
                    }
                    Ok(())
                }
                got => fail(format!("expected task_already_completed, got {got:?}")),
            },
            (Err(EngineError::Grade(_)), false, true) => Ok(()),
            (Ok(events), false, false) => {
                let want = if correct { Verdict::Correct } else { Verdict::Incorrect };
                match events.first() {
                    Some(Event::AnswerResult { verdict, .. }) if *verdict == want => {}
                    got => return fail(format!("expected {want:?}, got {got:?}")),
                }
                if self.state.active_presentation(player).is_some() {
                    return fail("presentation kept after grading");
                }
                if correct && !matches!(events.get(1), Some(Event::TaskListUpdate { .. })) {
                    return fail("completion without task list update");
                }
                Ok(())
            }
            (got, already, forge) => fail(format!("answer (already={already}, forge={forge}) gave {got:?}")),
        }
    }

    /// One move, checked against a model of the rate limit and the walls.
    /// Returns whether the position changed.
    fn step_once(&mut self, player: PlayerId, dir: Direction) -> Result<bool, String> {
        let pos = self.state.player(player).and_then(|p| p.pos);
        let running = self.state.phase().is_running();
        let recent = self
            .moves
            .get(&player)
            .map_or(0, |times| times.iter().filter(|&&t| self.now < t + MOVE_WINDOW_MILLIS).count());
        let events = match self.exec(Op::Move(player, dir))? {
            Ok(events) => events,
            Err(_) if !running || pos.is_none() => return Ok(false),
            Err(e) => return fail(format!("move failed: {e:?}")),
        };
        let Some(pos) = pos else { return Ok(false) };
        let target = self.state.map().apply_move(pos, dir);
        let moved = recent < MAX_MOVES_PER_WINDOW && target != pos;
        let announced = events.iter().any(
            |e| matches!(e, Event::PositionChanged { player_id, cell } if *player_id == player && *cell == target),
        );
        if moved != announced || self.state.player(player).and_then(|p| p.pos) != Some(if moved { target } else { pos })
        {
            return fail(format!("move {dir:?} of {player} at {}: expected moved={moved}, got {events:?}", self.now));
        }
        if !self.state.map().is_walkable(self.state.player(player).and_then(|p| p.pos).unwrap()) {
            return fail("player stands on a wall");
        }
        if moved {
            self.moves.entry(player).or_default().push(self.now);
        }
        Ok(moved)
    }

    fn seek(&mut self, player: PlayerId, task: usize) -> Check {
        let Some(p) = self.state.player(player) else { return Ok(()) };
        let (Some(team), Some(pos)) = (p.team, p.pos) else { return Ok(()) };
        if !self.state.phase().is_running() {
            return Ok(());
        }
        let tasks = &self.state.teams()[team as usize].tasks;
        let station = tasks[task % tasks.len()].station_id;
        let Ok((goal, path)) = self.state.map().path_to_station(pos, station) else { return Ok(()) };
        // Clear the rate-limit window, then stay under it: 10 moves take 1.1 s.
        self.now += MOVE_WINDOW_MILLIS;
        for dir in path {
            self.now += 110;
            if !self.step_once(player, dir)? {
                return fail("paced move along a path did not move");
            }
        }
        if self.state.player(player).and_then(|p| p.pos) != Some(goal) {
            return fail("path did not end at its goal");
        }
        if oracle::station_in_reach(self.state.map(), goal) != Some(station) {
            return fail("path goal is not beside its station");
        }
        Ok(())
    }

    pub fn step(&mut self, step: &Step) -> Check {
        self.now += step.dt;
        match step.action {
            Action::Join => {
                self.joined += 1;
                let _ = self.exec(Op::Join(format!("bot{}", self.joined)))?;
            }
            Action::SelectTeam { player, team } => {
                let _ = self.exec(Op::SelectTeam(self.pick(player), team))?;
            }
            Action::Leave { player } => {
                let _ = self.exec(Op::Leave(self.pick(player)))?;
            }
            Action::Start => {
                let _ = self.exec(Op::Start)?;
            }
            Action::Move { player, dir } => {
                self.step_once(self.pick(player), dir)?;
            }
            Action::Seek { player, task } => self.seek(self.pick(player), task)?,
            Action::Interact { player } => self.interact(self.pick(player))?,
            Action::Answer { player, correct } => self.answer(self.pick(player), correct, false)?,
            Action::Attempt { player, task, correct } => {
                let p = self.pick(player);
                self.seek(p, task)?;
                self.interact(p)?;
                if self.state.active_presentation(p).is_some() {
                    self.answer(p, correct, false)?;
                }
            }
            Action::Open { player, task } => {
                let p = self.pick(player);
                self.seek(p, task)?;
                self.interact(p)?;
            }
            Action::Forge { player } => self.answer(self.pick(player), false, true)?,
            Action::Cancel { player } => {
                let p = self.pick(player);
                let _ = self.exec(Op::Cancel(p))?;
                if self.state.active_presentation(p).is_some() {
                    return fail("cancel left the question open");
                }
            }
            Action::Reconnect { player } => {
                let p = self.pick(player);
                let _ = self.exec(Op::Connected(p, false))?;
                let _ = self.exec(Op::Connected(p, true))?;
            }
            Action::AdminEnd => {
                let _ = self.exec(Op::Finalize(EndReason::AdminEnd))?;
            }
        }
        Ok(())
    }

    /// Finalizes (if the game got past the lobby) and checks the report.
    fn finish(&mut self) -> Check {
        if self.state.phase().is_lobby() {
            return match self.state.clone().finalize(self.now, EndReason::AdminEnd) {
                Err(EngineError::WrongPhase) => Ok(()),
                other => fail(format!("finalize in lobby gave {other:?}")),
            };
        }
        self.now += 1;
        let _ = self.exec(Op::Finalize(EndReason::NaturalEnd))?.map_err(|e| format!("finalize failed: {e:?}"))?;
        let (first, _) = self.state.finalize(self.now, EndReason::NaturalEnd).map_err(|e| e.to_string())?;
        let (second, events) = self.state.finalize(self.now + 5, EndReason::AdminEnd).map_err(|e| e.to_string())?;
        if first != second || first.to_canonical_bytes() != second.to_canonical_bytes() || !events.is_empty() {
            return fail("finalize is not idempotent");
        }
        if first.winner != self.first_full {
            return fail("report winner differs from the first team to finish");
        }
        if let Some(w) = first.winner {
            if first.finish_order.first().map(|f| f.team) != Some(w) {
                return fail("winner is not first in the finish order");
            }
        }
        for task in &first.tasks {
            let seen = self.attempts.get(&(task.team, task.task_id.clone())).copied().unwrap_or(0);
            if task.attempts != seen {
                return fail(format!("report counts {} attempts for {}, observed {seen}", task.attempts, task.task_id));
            }
            if task.completed_by.is_some() && task.attempts < 1 {
                return fail("completed task with zero attempts");
            }
        }
        Ok(())
    }

    /// Feeds the recorded trace into a fresh game and compares everything.
    pub fn check_replay(&self, s: &Scenario) -> Check {
        let mut replay =
            GameState::create("PROP", s.config.clone(), s.bank.clone(), s.map.clone()).map_err(|e| e.to_string())?;
        for ((op, now), expected) in self.trace.iter().zip(&self.results) {
            let got = apply(&mut replay, op, *now);
            if got != *expected {
                return fail(format!("replay of {op:?} at {now} diverged"));
            }
        }
        if replay != self.state {
            return fail("replayed state differs");
        }
        if replay.event_log() != self.state.event_log() {
            return fail("replayed event log differs");
        }
        Ok(())
    }
}

/// Runs a whole scenario: seating, a first start attempt, the steps, then
/// finalization and replay.
pub fn run_scenario(s: &Scenario) -> Result<Coverage, String> {
    play(s).map(|run| run.coverage)
}

/// Like [`run_scenario`], returning the finished run.
pub fn play(s: &Scenario) -> Result<Run, String> {
    let mut run = Run::new(s)?;
    for &team in &s.seats {
        run.joined += 1;
        let name = format!("bot{}", run.joined);
        if run.exec(Op::Join(name))?.is_ok() {
            let p = *run.players.last().expect("join pushed a player");
            let _ = run.exec(Op::SelectTeam(p, team))?;
        }
    }
    run.now += 1;
    let _ = run.exec(Op::Start)?;
    for step in &s.steps {
        run.step(step)?;
    }
    run.finish()?;
    run.check_replay(s)?;
    Ok(run)
}
