//! Scripted player. The policy is a pure function of the wire messages seen
//! so far and the current time in milliseconds; the driver does the IO.
//!
//! Each bot claims the tasks whose list index is congruent to its index
//! within the team modulo the team size, walks to each claimed station in
//! turn and answers from its copy of the bank. A first attempt is correct
//! with probability `accuracy`; otherwise it submits a fixed wrong answer,
//! waits out the cooldown and then answers correctly.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use spacerace_core::engine::{PlayerId, TaskView, TeamIndex};
use spacerace_core::grading::Submission;
use spacerace_core::protocol::{Answer, GameOver, Interact, Move, Payload};
use spacerace_core::question::{PresentedQuestion, Question, QuestionBank, QuestionBody, Token};
use spacerace_core::world::{Cell, WorldMap};
use spacerace_core::Verdict;

/// Spacing between moves; the server accepts at most ten per second.
pub const MOVE_INTERVAL_MILLIS: u64 = 110;
/// A move with no `position_changed` after this long counts as dropped.
pub const MOVE_RETRY_MILLIS: u64 = 400;
/// Slack added to cooldown expiry times.
pub const COOLDOWN_MARGIN_MILLIS: u64 = 20;
/// Pause after an unexpected `nothing_here`.
const NOTHING_HERE_BACKOFF_MILLIS: u64 = 200;

#[derive(Debug, Clone)]
pub struct BotSetup {
    pub bot_index: usize,
    pub team: TeamIndex,
    pub index_in_team: usize,
    pub team_size: usize,
    pub accuracy: f64,
    pub think_millis: u64,
    pub cooldown_millis: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Action {
    Send(Payload),
    /// Nothing to send before this time unless a message arrives.
    WaitUntil(u64),
    /// Nothing to send until a message arrives.
    Idle,
    /// The game is over.
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Expect {
    Move,
    Interact,
    Answer,
}

#[derive(Debug, Clone, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BotStats {
    pub attempts: u32,
    pub corrects: u32,
    pub dropped_moves: u32,
    pub game_overs: u32,
    pub error_frames: u32,
    #[serde(skip)]
    pub latencies: Vec<u64>,
    /// Wire-level rule breaks noticed by this bot.
    pub violations: Vec<String>,
    /// Messages the policy did not expect, kept for diagnosis.
    pub surprises: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Bot {
    setup: BotSetup,
    bank: Arc<QuestionBank>,
    player: Option<PlayerId>,
    map: Option<WorldMap>,
    pos: Option<Cell>,
    tasks: Vec<TaskView>,
    question: Option<PresentedQuestion>,
    pending: Option<(Expect, u64)>,
    not_before: u64,
    cooling: BTreeMap<String, u64>,
    tried: BTreeSet<String>,
    completed_seen: BTreeMap<TeamIndex, u32>,
    over: Option<GameOver>,
    rng: ChaCha8Rng,
    pub stats: BotStats,
}

impl Bot {
    pub fn new(setup: BotSetup, bank: Arc<QuestionBank>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
        rng.set_stream(setup.bot_index as u64);
        Self {
            setup,
            bank,
            player: None,
            map: None,
            pos: None,
            tasks: Vec::new(),
            question: None,
            pending: None,
            not_before: 0,
            cooling: BTreeMap::new(),
            tried: BTreeSet::new(),
            completed_seen: BTreeMap::new(),
            over: None,
            rng,
            stats: BotStats::default(),
        }
    }

    pub fn setup(&self) -> &BotSetup {
        &self.setup
    }

    pub fn player(&self) -> Option<PlayerId> {
        self.player
    }

    pub fn position(&self) -> Option<Cell> {
        self.pos
    }

    pub fn game_over(&self) -> Option<GameOver> {
        self.over
    }

    /// Tasks this bot is responsible for, in list order.
    pub fn claims(&self) -> impl Iterator<Item = &TaskView> {
        let (size, me) = (self.setup.team_size.max(1), self.setup.index_in_team);
        self.tasks.iter().enumerate().filter(move |(i, _)| i % size == me).map(|(_, t)| t)
    }

    fn current_claim(&self) -> Option<&TaskView> {
        self.claims().find(|t| !t.status.is_completed())
    }

    fn resolve(&mut self, expect: Expect, now: u64) {
        if let Some((pending, sent)) = self.pending {
            if pending == expect {
                self.stats.latencies.push(now.saturating_sub(sent));
                self.pending = None;
            }
        }
    }

    pub fn next_action(&mut self, now: u64) -> Action {
        if self.over.is_some() {
            return Action::Done;
        }
        let (Some(map), Some(pos)) = (&self.map, self.pos) else { return Action::Idle };
        match self.pending {
            Some((Expect::Move, sent)) if now >= sent + MOVE_RETRY_MILLIS => {
                self.stats.dropped_moves += 1;
                self.pending = None;
            }
            Some((Expect::Move, sent)) => return Action::WaitUntil(sent + MOVE_RETRY_MILLIS),
            Some(_) => return Action::Idle,
            None => {}
        }
        if now < self.not_before {
            return Action::WaitUntil(self.not_before);
        }
        let Some(claim) = self.current_claim().cloned() else { return Action::Idle };

        if let Some(question) = self.question.take() {
            if question.task_id == claim.task_id {
                let first = self.tried.insert(claim.task_id.clone());
                let correct = !first || self.rng.gen_bool(self.setup.accuracy);
                match self.answer_for(&question, correct) {
                    Some(submission) => {
                        self.pending = Some((Expect::Answer, now));
                        return Action::Send(Answer { task_id: claim.task_id, submission }.into());
                    }
                    None => {
                        self.stats.surprises.push(format!("no bank question matches {:?}", question.prompt));
                        return Action::Idle;
                    }
                }
            }
        }
        if let Some(&until) = self.cooling.get(&claim.task_id) {
            if now < until {
                return Action::WaitUntil(until);
            }
        }
        let Ok((_, path)) = map.path_to_station(pos, claim.station_id) else {
            self.stats.surprises.push(format!("station {} unreachable", claim.station_id));
            return Action::Idle;
        };
        match path.first() {
            None => {
                self.pending = Some((Expect::Interact, now));
                Action::Send(Interact {}.into())
            }
            Some(&dir) => {
                self.pending = Some((Expect::Move, now));
                self.not_before = now + MOVE_INTERVAL_MILLIS;
                Action::Send(Move { dir }.into())
            }
        }
    }

    pub fn observe(&mut self, payload: &Payload, now: u64) {
        match payload {
            Payload::Joined(m) => self.player = Some(m.player_id),
            Payload::GameStarted(m) => {
                self.map = Some(m.map.clone());
                self.pos = m.positions.iter().find(|p| Some(p.player_id) == self.player).map(|p| p.cell);
                if let Some(team) = m.tasks.iter().find(|t| t.team == self.setup.team) {
                    self.tasks = team.tasks.clone();
                }
            }
            Payload::PositionChanged(m) if Some(m.player_id) == self.player => {
                self.pos = Some(m.cell);
                self.resolve(Expect::Move, now);
            }
            Payload::Question(m) => {
                self.resolve(Expect::Interact, now);
                self.question = Some(m.question.clone());
                self.not_before = now + self.setup.think_millis;
            }
            Payload::CooldownActive(m) => {
                self.resolve(Expect::Interact, now);
                let until = self.cooling.entry(m.task_id.clone()).or_default();
                *until = (*until).max(m.expires_at.max(now) + COOLDOWN_MARGIN_MILLIS);
            }
            Payload::NothingHere(_) => {
                self.resolve(Expect::Interact, now);
                self.stats.surprises.push("nothing_here at a claimed station".into());
                self.not_before = now + NOTHING_HERE_BACKOFF_MILLIS;
            }
            Payload::AnswerResult(m) => {
                self.resolve(Expect::Answer, now);
                self.stats.attempts += 1;
                if m.verdict == Verdict::Correct {
                    self.stats.corrects += 1;
                } else {
                    let wait = now + self.setup.cooldown_millis;
                    let until = wait.max(m.cooldown_until.unwrap_or(0)) + COOLDOWN_MARGIN_MILLIS;
                    self.cooling.insert(m.task_id.clone(), until);
                }
                self.not_before = now + self.setup.think_millis;
            }
            Payload::TaskAlreadyCompleted(_) => {
                self.resolve(Expect::Answer, now);
                self.question = None;
            }
            Payload::TaskUpdate(m) => {
                let seen = self.completed_seen.entry(m.team).or_default();
                if m.completed < *seen {
                    self.stats.violations.push(format!("team {} completed went {} -> {}", m.team, seen, m.completed));
                }
                *seen = (*seen).max(m.completed);
                if m.team == self.setup.team {
                    self.tasks = m.tasks.clone();
                }
            }
            Payload::GameOver(m) => {
                self.stats.game_overs += 1;
                if self.stats.game_overs > 1 {
                    self.stats.violations.push("more than one game_over".into());
                }
                self.over.get_or_insert(*m);
                self.pending = None;
            }
            Payload::Error(e) => {
                self.stats.error_frames += 1;
                self.stats.surprises.push(format!("error {}: {}", e.code, e.message));
                self.pending = None;
            }
            _ => {}
        }
    }

    fn answer_for(&self, view: &PresentedQuestion, correct: bool) -> Option<Submission> {
        let question = self.bank.questions.iter().find(|q| q.prompt == view.prompt && q.kind() == view.body.kind())?;
        build_submission(question, view, correct)
    }
}

/// The intended answer to `view`, or a fixed wrong one, found by matching
/// item texts back to the authored question.
pub fn build_submission(question: &Question, view: &PresentedQuestion, correct: bool) -> Option<Submission> {
    let token =
        |text: &str| -> Option<Token> { view.body.items().iter().find(|i| i.text == text).map(|i| i.token.clone()) };
    Some(match &question.body {
        QuestionBody::MultipleChoice { options, correct: right } => {
            let mut picks: Vec<usize> =
                if correct { right.clone() } else { (0..options.len()).filter(|i| !right.contains(i)).collect() };
            if picks.is_empty() {
                // Every option is correct, so any strict subset is wrong.
                picks.push(0);
            }
            let selected_tokens = picks.iter().map(|&i| token(&options[i])).collect::<Option<_>>()?;
            Submission::MultipleChoice { selected_tokens }
        }
        QuestionBody::Numeric { answer, tolerance } => {
            let value = if correct {
                *answer
            } else if (answer + tolerance + 1.0).is_finite() {
                answer + tolerance + 1.0
            } else {
                answer - tolerance - 1.0
            };
            Submission::Numeric { value }
        }
        QuestionBody::Ordering { items } => {
            let mut order: Vec<&String> = items.iter().collect();
            if !correct {
                order.reverse();
            }
            Submission::Ordering { ordered_tokens: order.into_iter().map(|t| token(t)).collect::<Option<_>>()? }
        }
        QuestionBody::Classification { items, .. } => Submission::Classification {
            assignments: items
                .iter()
                .map(|i| Some((token(&i.text)?, if correct { i.category } else { i.category.flipped() })))
                .collect::<Option<_>>()?,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use spacerace_core::engine::TaskStatus;
    use spacerace_core::engine::{PlayerPosition, TeamTasks};
    use spacerace_core::protocol::{AnswerResult, CooldownActive, GameStarted, Joined, QuestionMsg};
    use spacerace_core::question::present_question;

    fn bank() -> Arc<QuestionBank> {
        Arc::new(crate::sim::practice_bank(4))
    }

    fn setup(accuracy: f64) -> BotSetup {
        BotSetup {
            bot_index: 0,
            team: 0,
            index_in_team: 0,
            team_size: 1,
            accuracy,
            think_millis: 0,
            cooldown_millis: 1_000,
            seed: 3,
        }
    }

    /// A walkable cell from which `station` is in reach.
    fn near(map: &WorldMap, station: u32) -> Cell {
        map.path_to_station(map.spawns(0)[0], station).unwrap().0
    }

    fn started(bot: &mut Bot, at: Cell, station: u32) {
        bot.observe(
            &Joined { game_code: "ABCDEF".into(), player_id: PlayerId(0), resume_token: "t".into(), name: "b".into() }
                .into(),
            0,
        );
        bot.observe(
            &GameStarted {
                map_ref: "default".into(),
                map: WorldMap::default_map(),
                tasks: vec![TeamTasks {
                    team: 0,
                    tasks: vec![TaskView { task_id: "T1".into(), station_id: station, status: TaskStatus::Pending }],
                }],
                positions: vec![PlayerPosition { player_id: PlayerId(0), cell: at }],
            }
            .into(),
            0,
        );
    }

    #[test]
    fn interacts_when_in_reach_of_the_claimed_station() {
        let map = WorldMap::default_map();
        let station = map.stations()[0].id;
        let mut bot = Bot::new(setup(1.0), bank());
        started(&mut bot, near(&map, station), station);
        assert_eq!(bot.next_action(10), Action::Send(Interact {}.into()));
        assert_eq!(bot.next_action(11), Action::Idle, "waits for the reply");
    }

    #[test]
    fn walks_toward_a_distant_station_at_the_move_pace() {
        let map = WorldMap::default_map();
        let far = map.stations().iter().max_by_key(|s| s.cell.x + s.cell.y).unwrap();
        let mut bot = Bot::new(setup(1.0), bank());
        started(&mut bot, map.spawns(0)[0], far.id);
        assert!(matches!(bot.next_action(0), Action::Send(Payload::Move(_))));
        assert_eq!(bot.next_action(1), Action::WaitUntil(MOVE_RETRY_MILLIS));
    }

    #[test]
    fn no_interact_before_cooldown_expiry() {
        let map = WorldMap::default_map();
        let station = map.stations()[0].id;
        let mut bot = Bot::new(setup(1.0), bank());
        started(&mut bot, near(&map, station), station);
        assert_eq!(bot.next_action(10), Action::Send(Interact {}.into()));
        bot.observe(&CooldownActive { task_id: "T1".into(), expires_at: 5_000 }.into(), 20);
        let until = 5_000 + COOLDOWN_MARGIN_MILLIS;
        for now in [21, 1_000, until - 1] {
            assert_eq!(bot.next_action(now), Action::WaitUntil(until));
        }
        assert_eq!(bot.next_action(until), Action::Send(Interact {}.into()));
    }

    #[test]
    fn zero_accuracy_answers_wrong_once_then_right() {
        let map = WorldMap::default_map();
        let station = map.stations()[0].id;
        let bank = bank();
        let mut bot = Bot::new(setup(0.0), bank.clone());
        started(&mut bot, near(&map, station), station);
        let q = &bank.questions[1];
        for (round, expect_correct) in [(0u64, false), (1, true)] {
            let now = 10 + round * 5_000;
            assert_eq!(bot.next_action(now), Action::Send(Interact {}.into()));
            let (view, tokens) = present_question(q, "T1", round);
            bot.observe(&QuestionMsg { question: view }.into(), now + 1);
            let Action::Send(Payload::Answer(a)) = bot.next_action(now + 2) else { panic!("expected an answer") };
            let verdict = spacerace_core::grade(q, &tokens, &a.submission).unwrap().verdict;
            assert_eq!(verdict.is_correct(), expect_correct);
            bot.observe(
                &AnswerResult {
                    task_id: "T1".into(),
                    verdict,
                    cooldown_until: (!expect_correct).then_some(now + 1_002),
                }
                .into(),
                now + 3,
            );
        }
        assert_eq!((bot.stats.attempts, bot.stats.corrects), (2, 1));
    }

    #[test]
    fn idles_once_every_claim_is_done() {
        let map = WorldMap::default_map();
        let station = map.stations()[0].id;
        let mut bot = Bot::new(setup(1.0), bank());
        started(&mut bot, near(&map, station), station);
        bot.observe(
            &spacerace_core::protocol::TaskUpdate {
                team: 0,
                completed: 1,
                total: 1,
                energy: 1,
                tasks: vec![TaskView {
                    task_id: "T1".into(),
                    station_id: station,
                    status: TaskStatus::Completed { by_player: PlayerId(0), at_millis: 5 },
                }],
            }
            .into(),
            5,
        );
        assert_eq!(bot.next_action(6), Action::Idle);
    }

    #[test]
    fn claims_split_the_task_list_by_index() {
        let mut s = setup(1.0);
        s.team_size = 3;
        s.index_in_team = 1;
        let mut bot = Bot::new(s, bank());
        bot.tasks = (0..8)
            .map(|i| TaskView { task_id: format!("T{}", i + 1), station_id: 0, status: TaskStatus::Pending })
            .collect();
        let ids: Vec<&str> = bot.claims().map(|t| t.task_id.as_str()).collect();
        assert_eq!(ids, ["T2", "T5", "T8"]);
    }
}
