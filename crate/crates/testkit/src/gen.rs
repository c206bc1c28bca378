//! Proptest strategies covering questions, banks, maps and every wire
//! payload type.

use proptest::collection::{btree_set, vec};
use proptest::prelude::*;
use proptest::sample::{select, subsequence};
use proptest::strategy::Union;

use spacerace_core::engine::{
    EndReason, EventLogDigest, FinishEntry, FinishOutcome, GameConfig, Phase, PlayerId, PlayerPosition, PlayerReport,
    PlayerSnapshot, Report, RosterEntry, SupervisionSnapshot, TaskReport, TaskStatus, TaskView, TeamIndex,
    TeamSnapshot, TeamTasks,
};
use spacerace_core::grading::{Submission, Verdict};
use spacerace_core::protocol::*;
use spacerace_core::question::{
    present_question, Category, ClassificationItem, PresentedQuestion, Question, QuestionBank, QuestionBody, Token,
    FIXED_ITEMS, MAX_OPTIONS, MIN_OPTIONS,
};
use spacerace_core::world::{Cell, Direction, MapFile, StationDef, WorldMap};

pub fn word() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9]{0,7}"
}

/// Human-ish text, never blank, sometimes non-ASCII.
pub fn text() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9 ,.?¿éñ]{0,23}"
}

fn distinct_words(n: usize) -> impl Strategy<Value = Vec<String>> {
    btree_set(word(), n).prop_map(|s| s.into_iter().collect::<Vec<_>>()).prop_shuffle()
}

pub fn category() -> impl Strategy<Value = Category> {
    prop_oneof![Just(Category::First), Just(Category::Second)]
}

/// Finite floats across the whole range, subnormals included.
pub fn finite_f64() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

pub fn multiple_choice_body() -> impl Strategy<Value = QuestionBody> {
    (MIN_OPTIONS..=MAX_OPTIONS).prop_flat_map(|n| {
        (distinct_words(n), subsequence((0..n).collect::<Vec<_>>(), 1..=n).prop_shuffle())
            .prop_map(|(options, correct)| QuestionBody::MultipleChoice { options, correct })
    })
}

pub fn numeric_body() -> impl Strategy<Value = QuestionBody> {
    let tolerance = prop_oneof![Just(0.0), 0.0..10.0, Just(0.5)];
    (-1.0e6..1.0e6, tolerance).prop_map(|(answer, tolerance)| QuestionBody::Numeric { answer, tolerance })
}

pub fn ordering_body() -> impl Strategy<Value = QuestionBody> {
    distinct_words(FIXED_ITEMS).prop_map(|items| QuestionBody::Ordering { items })
}

pub fn classification_body() -> impl Strategy<Value = QuestionBody> {
    (distinct_words(2), distinct_words(FIXED_ITEMS), vec(category(), FIXED_ITEMS)).prop_map(|(names, texts, cats)| {
        QuestionBody::Classification {
            categories: [names[0].clone(), names[1].clone()],
            items: texts.into_iter().zip(cats).map(|(text, category)| ClassificationItem { text, category }).collect(),
        }
    })
}

pub fn question_body() -> impl Strategy<Value = QuestionBody> {
    prop_oneof![multiple_choice_body(), numeric_body(), ordering_body(), classification_body()]
}

/// A valid question with the given id.
pub fn question_with_id(id: String) -> impl Strategy<Value = Question> {
    (text(), question_body()).prop_map(move |(prompt, body)| Question { id: id.clone(), prompt, body })
}

pub fn question() -> impl Strategy<Value = Question> {
    word().prop_flat_map(question_with_id)
}

/// A valid bank; ids are unique and prompts are distinct.
pub fn bank(sizes: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = QuestionBank> {
    (word(), vec(question_body(), sizes)).prop_map(|(name, bodies)| {
        let questions = bodies
            .into_iter()
            .enumerate()
            .map(|(i, body)| Question { id: format!("q{i}"), prompt: format!("Question {i}?"), body })
            .collect();
        QuestionBank::new(name, questions)
    })
}

pub fn token() -> impl Strategy<Value = Token> {
    "[0-9a-f]{8}".prop_map(Token)
}

pub fn player_id() -> impl Strategy<Value = PlayerId> {
    (1u32..500).prop_map(PlayerId)
}

pub fn team() -> impl Strategy<Value = TeamIndex> {
    0u8..4
}

pub fn cell() -> impl Strategy<Value = Cell> {
    (0u32..40, 0u32..40).prop_map(|(x, y)| Cell::new(x, y))
}

pub fn direction() -> impl Strategy<Value = Direction> {
    select(Direction::ALL.to_vec())
}

pub fn task_id() -> impl Strategy<Value = String> {
    (1u32..40).prop_map(|i| format!("T{i}"))
}

pub fn code() -> impl Strategy<Value = String> {
    "[A-HJ-NP-Z2-9]{6}"
}

pub fn secret() -> impl Strategy<Value = String> {
    "[0-9a-f]{32}"
}

pub fn submission() -> impl Strategy<Value = Submission> {
    prop_oneof![
        vec(token(), 0..6).prop_map(|selected_tokens| Submission::MultipleChoice { selected_tokens }),
        finite_f64().prop_map(|value| Submission::Numeric { value }),
        vec(token(), 0..6).prop_map(|ordered_tokens| Submission::Ordering { ordered_tokens }),
        prop::collection::btree_map(token(), category(), 0..6)
            .prop_map(|assignments| Submission::Classification { assignments }),
    ]
}

/// A random valid map, 2 to 12 cells per side, up to 4 stations.
pub fn world_map() -> impl Strategy<Value = WorldMap> {
    (2u32..=12, 2u32..=12)
        .prop_flat_map(|(w, h)| (Just((w, h)), vec(prop::bool::weighted(0.25), (w * h) as usize)))
        .prop_filter_map("too few free cells", |((w, h), blocked)| {
            let free: Vec<Cell> =
                (0..w * h).filter(|&i| !blocked[i as usize]).map(|i| Cell::new(i % w, i / w)).collect();
            let walls: Vec<Cell> =
                (0..w * h).filter(|&i| blocked[i as usize]).map(|i| Cell::new(i % w, i / w)).collect();
            (free.len() >= 2).then_some((w, h, walls, free))
        })
        .prop_flat_map(|(w, h, walls, free)| {
            let k = free.len().min(4);
            (
                Just((w, h, walls)),
                subsequence(free.clone(), 1..=k).prop_shuffle(),
                vec(vec(select(free), 1..=3), 4),
                any::<u32>(),
            )
        })
        .prop_map(|((width, height, blocked), station_cells, spawns, id_base)| {
            let stations = station_cells
                .into_iter()
                .enumerate()
                .map(|(i, cell)| StationDef { id: (id_base % 50).wrapping_add(i as u32 * 3), cell })
                .collect();
            let spawns: [Vec<Cell>; 4] = spawns.try_into().expect("four spawn lists");
            WorldMap::try_from(MapFile { width, height, blocked, stations, spawns }).expect("generated map is valid")
        })
}

pub fn game_config() -> impl Strategy<Value = GameConfig> {
    (1u8..=4, 1u8..=10, 1u32..20, 0u64..20_000, 1u32..5, any::<u64>(), word(), word()).prop_map(
        |(teams, max, tasks, cooldown_millis, energy_per_task, rng_seed, bank_ref, map_ref)| GameConfig {
            teams,
            max_players_per_team: max,
            tasks_per_team: tasks,
            cooldown_millis,
            energy_per_task,
            rng_seed,
            bank_ref,
            map_ref,
        },
    )
}

pub fn game_request() -> impl Strategy<Value = GameRequest> {
    (1u8..=4, 1u8..=10, 1u32..20, 0u64..20_000, 1u32..5, prop::option::of(any::<u64>()), prop::option::of(word()))
        .prop_map(|(teams, max, tasks, cooldown_millis, energy_per_task, rng_seed, map_name)| GameRequest {
            teams,
            max_players_per_team: max,
            tasks_per_team: tasks,
            cooldown_millis,
            energy_per_task,
            rng_seed,
            map_name,
        })
}

pub fn presented_question() -> impl Strategy<Value = PresentedQuestion> {
    (question(), task_id(), any::<u64>()).prop_map(|(q, t, seed)| present_question(&q, &t, seed).0)
}

pub fn task_status() -> impl Strategy<Value = TaskStatus> {
    prop_oneof![
        Just(TaskStatus::Pending),
        (player_id(), any::<u64>()).prop_map(|(by_player, at_millis)| TaskStatus::Completed { by_player, at_millis }),
    ]
}

pub fn task_view() -> impl Strategy<Value = TaskView> {
    (task_id(), 0u32..40, task_status()).prop_map(|(task_id, station_id, status)| TaskView {
        task_id,
        station_id,
        status,
    })
}

pub fn end_reason() -> impl Strategy<Value = EndReason> {
    prop_oneof![Just(EndReason::NaturalEnd), Just(EndReason::AdminEnd)]
}

pub fn verdict() -> impl Strategy<Value = Verdict> {
    prop_oneof![Just(Verdict::Correct), Just(Verdict::Incorrect)]
}

pub fn phase() -> impl Strategy<Value = Phase> {
    prop_oneof![
        Just(Phase::Lobby),
        any::<u64>().prop_map(|started_at_millis| Phase::Running { started_at_millis }),
        (prop::option::of(team()), any::<u64>(), any::<u64>(), end_reason()).prop_map(
            |(winner, started_at_millis, ended_at_millis, reason)| Phase::Finished {
                winner,
                started_at_millis,
                ended_at_millis,
                reason,
            }
        ),
    ]
}

pub fn roster_entry() -> impl Strategy<Value = RosterEntry> {
    (player_id(), word(), prop::option::of(team()), any::<bool>())
        .prop_map(|(player_id, name, team, connected)| RosterEntry { player_id, name, team, connected })
}

pub fn snapshot() -> impl Strategy<Value = SupervisionSnapshot> {
    let team_snapshot = (team(), 0u32..11, any::<u64>(), 0u32..20, 0u32..20, vec(task_view(), 0..4)).prop_map(
        |(team, players, energy, completed, total, tasks)| TeamSnapshot {
            team,
            players,
            energy,
            completed,
            total,
            tasks,
        },
    );
    let player_snapshot = (player_id(), word(), prop::option::of(team()), prop::option::of(cell()), any::<bool>())
        .prop_map(|(player_id, name, team, pos, connected)| PlayerSnapshot { player_id, name, team, pos, connected });
    (phase(), vec(team_snapshot, 0..4), vec(player_snapshot, 0..6))
        .prop_map(|(phase, teams, players)| SupervisionSnapshot { phase, teams, players })
}

pub fn report() -> impl Strategy<Value = Report> {
    let outcome = prop_oneof![
        Just(FinishOutcome::DidNotFinish),
        any::<u64>().prop_map(|at_millis| FinishOutcome::Finished { at_millis }),
    ];
    let finish =
        (team(), 0u32..20, outcome).prop_map(|(team, completed, outcome)| FinishEntry { team, completed, outcome });
    let task =
        (team(), task_id(), word(), 0u32..40, 0u32..9, prop::option::of(player_id()), prop::option::of(any::<u64>()))
            .prop_map(|(team, task_id, question_id, station_id, attempts, completed_by, completed_at_millis)| {
                TaskReport { team, task_id, question_id, station_id, attempts, completed_by, completed_at_millis }
            });
    let player = (player_id(), word(), prop::option::of(team()), 0u32..30, 0u32..30).prop_map(
        |(player_id, name, team, submissions, correct_submissions)| PlayerReport {
            player_id,
            name,
            team,
            submissions,
            correct_submissions,
        },
    );
    let digest = (any::<u64>(), "[0-9a-f]{64}").prop_map(|(events, sha256)| EventLogDigest { events, sha256 });
    (
        (code(), game_config(), end_reason(), any::<u64>(), any::<u64>(), prop::option::of(team())),
        (vec(finish, 0..4), vec(task, 0..6), vec(player, 0..6), digest),
    )
        .prop_map(
            |(
                (game_id, config, end_reason, started_at_millis, ended_at_millis, winner),
                (finish_order, tasks, players, event_log),
            )| {
                Report {
                    game_id,
                    config,
                    end_reason,
                    started_at_millis,
                    ended_at_millis,
                    winner,
                    finish_order,
                    tasks,
                    players,
                    event_log,
                }
            },
        )
}

fn admin_game() -> impl Strategy<Value = AdminGame> {
    (code(), secret()).prop_map(|(game_code, admin_token)| AdminGame { game_code, admin_token })
}

/// One strategy per message type, keyed by its `type` spelling.
pub fn payload_strategies() -> Vec<(&'static str, BoxedStrategy<Payload>)> {
    fn boxed<S>(s: S) -> BoxedStrategy<Payload>
    where
        S: Strategy + 'static,
        S::Value: Into<Payload>,
    {
        s.prop_map(Into::into).boxed()
    }
    vec![
        ("join", boxed((code(), text()).prop_map(|(game_code, name)| Join { game_code, name }))),
        ("select_team", boxed(team().prop_map(|team| SelectTeam { team }))),
        ("move", boxed(direction().prop_map(|dir| Move { dir }))),
        ("interact", boxed(Just(Interact {}))),
        ("answer", boxed((task_id(), submission()).prop_map(|(task_id, submission)| Answer { task_id, submission }))),
        ("cancel_question", boxed(Just(CancelQuestion {}))),
        ("resume", boxed((code(), secret()).prop_map(|(game_code, resume_token)| Resume { game_code, resume_token }))),
        (
            "admin_create_game",
            boxed(
                (game_request(), prop::option::of(word()), prop::option::of(bank(1..=3)))
                    .prop_map(|(config, bank_name, bank)| AdminCreateGame { config, bank_name, bank }),
            ),
        ),
        (
            "admin_load_bank",
            boxed((code(), secret(), bank(1..=3), prop::option::of(word())).prop_map(
                |(game_code, admin_token, bank, save_as)| AdminLoadBank { game_code, admin_token, bank, save_as },
            )),
        ),
        ("admin_start", admin_game().prop_map(Payload::AdminStart).boxed()),
        ("admin_end", admin_game().prop_map(Payload::AdminEnd).boxed()),
        ("admin_subscribe", admin_game().prop_map(Payload::AdminSubscribe).boxed()),
        (
            "joined",
            boxed((code(), player_id(), secret(), word()).prop_map(|(game_code, player_id, resume_token, name)| {
                Joined { game_code, player_id, resume_token, name }
            })),
        ),
        (
            "lobby_update",
            boxed((code(), 1u8..=4, 1u8..=10, vec(roster_entry(), 0..6)).prop_map(
                |(game_code, teams, max_players_per_team, players)| LobbyUpdate {
                    game_code,
                    teams,
                    max_players_per_team,
                    players,
                },
            )),
        ),
        (
            "game_started",
            boxed(
                (
                    word(),
                    world_map(),
                    vec((team(), vec(task_view(), 0..4)).prop_map(|(team, tasks)| TeamTasks { team, tasks }), 0..4),
                    vec((player_id(), cell()).prop_map(|(player_id, cell)| PlayerPosition { player_id, cell }), 0..6),
                )
                    .prop_map(|(map_ref, map, tasks, positions)| GameStarted {
                        map_ref,
                        map,
                        tasks,
                        positions,
                    }),
            ),
        ),
        (
            "position_changed",
            boxed((player_id(), cell()).prop_map(|(player_id, cell)| PositionChanged { player_id, cell })),
        ),
        ("question", boxed(presented_question().prop_map(|question| QuestionMsg { question }))),
        (
            "answer_result",
            boxed(
                (task_id(), verdict(), prop::option::of(any::<u64>()))
                    .prop_map(|(task_id, verdict, cooldown_until)| AnswerResult { task_id, verdict, cooldown_until }),
            ),
        ),
        (
            "task_update",
            boxed((team(), 0u32..20, 0u32..20, any::<u64>(), vec(task_view(), 0..5)).prop_map(
                |(team, completed, total, energy, tasks)| TaskUpdate { team, completed, total, energy, tasks },
            )),
        ),
        (
            "cooldown_active",
            boxed((task_id(), any::<u64>()).prop_map(|(task_id, expires_at)| CooldownActive { task_id, expires_at })),
        ),
        ("nothing_here", boxed(Just(NothingHere {}))),
        ("task_already_completed", boxed(task_id().prop_map(|task_id| TaskAlreadyCompleted { task_id }))),
        (
            "game_over",
            boxed((prop::option::of(team()), end_reason()).prop_map(|(winner, reason)| GameOver { winner, reason })),
        ),
        ("snapshot", boxed((code(), snapshot()).prop_map(|(game_code, snapshot)| SnapshotMsg { game_code, snapshot }))),
        ("report", boxed(report().prop_map(|report| ReportMsg { report }))),
        (
            "game_created",
            boxed((code(), secret()).prop_map(|(game_code, admin_token)| GameCreated { game_code, admin_token })),
        ),
        ("error", boxed((word(), text()).prop_map(|(code, message)| ErrorMsg { code, message }))),
    ]
}

/// Any payload of the vocabulary, types drawn uniformly.
pub fn payload() -> impl Strategy<Value = Payload> {
    Union::new(payload_strategies().into_iter().map(|(_, s)| s))
}

pub fn wire_message() -> impl Strategy<Value = WireMessage> {
    (any::<u64>(), payload()).prop_map(|(seq, payload)| WireMessage { seq, payload })
}

/// Payload fields a sender may omit, per message type.
pub fn optional_fields(type_name: &str) -> &'static [&'static str] {
    match type_name {
        "admin_create_game" => &["bankName", "bank"],
        "admin_load_bank" => &["saveAs"],
        "answer_result" => &["cooldownUntil"],
        _ => &[],
    }
}
