//! Acceptance run: one line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use spacerace::sim::{run_simulation, GameSummary, ServerAddr, SimConfig};
use spacerace::{RunningServer, ServerConfig};
use spacerace_core::engine::{EndReason, FinishOutcome};
use spacerace_core::Report;
use spacerace_testkit::{scan, suites};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

fn timed(limit: Duration, run: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let detail = run()?;
    let took = start.elapsed();
    if took >= limit {
        return Err(format!("took {took:.2?}, limit {limit:?}"));
    }
    Ok(format!("{detail} in {took:.2?}"))
}

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn grading() -> Outcome {
    timed(Duration::from_secs(5), || {
        let s = suites::grading_enumeration()?;
        ensure(s.ordering_permutations == 24 && s.classification_assignments == 16, || format!("{s:?}"))?;
        Ok(format!("{} submissions graded", s.graded))
    })
}

fn engine() -> Outcome {
    timed(Duration::from_secs(60), || {
        let s = suites::engine_properties(10_000)?;
        ensure(s.cases == 10_000 && s.natural_ends > 0 && s.admin_ends > 0, || format!("{s:?}"))?;
        Ok(format!("{} cases, {} ops, {} started", s.cases, s.ops, s.started))
    })
}

fn codec() -> Outcome {
    timed(Duration::from_secs(10), || {
        let s = suites::codec_properties(10_000, 64)?;
        ensure(s.round_trips >= 10_000, || format!("{s:?}"))?;
        ensure(s.types_checked == 27, || format!("{} of 27 types checked", s.types_checked))?;
        Ok(format!("{} round trips over {} types", s.round_trips, s.types_checked))
    })
}

async fn server(root: &Path) -> RunningServer {
    spacerace::bind(ServerConfig::local(root)).await.expect("server starts")
}

fn sim(server: &RunningServer) -> SimConfig {
    SimConfig::new(ServerAddr::WebSocket(server.ws_url()))
}

async fn one_game(config: SimConfig) -> Result<GameSummary, String> {
    let mut report = run_simulation(config).await.map_err(|e| e.to_string())?;
    ensure(report.games.len() == 1, || "expected one game".into())?;
    Ok(report.games.remove(0))
}

fn failed_assertions(game: &GameSummary) -> Result<(), String> {
    let failed: Vec<String> =
        game.assertions.iter().filter(|a| !a.passed).map(|a| format!("{}: {}", a.name, a.detail)).collect();
    ensure(failed.is_empty(), || failed.join("; "))
}

fn stored_report(dir: &Path, code: &str) -> Result<Report, String> {
    let files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(&format!("{code}-")))
        .collect();
    ensure(files.len() == 1, || format!("{} report files for {code}", files.len()))?;
    let bytes = std::fs::read(&files[0]).map_err(|e| e.to_string())?;
    serde_json::from_slice(&bytes).map_err(|e| e.to_string())
}

async fn answer_hiding() -> Outcome {
    let start = Instant::now();
    let s = suites::answer_hiding_audit(64, 200)?;
    ensure(s.server_types == 15, || format!("{} of 15 server types audited", s.server_types))?;

    // Everything a live server sends to players during a game.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let server = server(dir.path()).await;
    let mut config = sim(&server);
    config.teams = 2;
    config.players = 2;
    config.tasks = 4;
    config.accuracy = 0.5;
    config.cooldown_millis = 500;
    config.keep_transcripts = true;
    let game = one_game(config).await;
    server.shutdown().await;
    let game = game?;
    let (mut frames, mut questions) = (0, 0);
    for bot in &game.bots {
        for frame in &bot.transcript {
            let doc: serde_json::Value = serde_json::from_str(frame).map_err(|e| e.to_string())?;
            let hits = scan::find_keys(&doc, scan::ANSWER_KEYS);
            ensure(hits.is_empty(), || format!("bot {} received {hits:?} in {frame}", bot.bot))?;
            frames += 1;
            questions += usize::from(doc["type"] == "question");
        }
    }
    ensure(questions > 0, || "no question frames were observed".into())?;
    Ok(format!(
        "{} documents, {} presentations, {} games, {frames} live frames ({questions} questions) in {:.2?}",
        s.documents,
        s.presentations,
        s.games,
        start.elapsed()
    ))
}

async fn full_game() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let server = server(dir.path()).await;
    let config = sim(&server);
    let start = Instant::now();
    let game = one_game(config).await;
    let took = start.elapsed();
    server.shutdown().await;
    let game = game?;
    failed_assertions(&game)?;
    let winner = game.winner.ok_or("no winner")?;
    ensure(game.end_reason == EndReason::NaturalEnd, || format!("ended by {:?}", game.end_reason))?;
    ensure(game.bots.iter().all(|b| b.stats.game_overs == 1), || "a bot missed game_over".into())?;
    let stored = stored_report(&dir.path().join("reports"), &game.game_code)?;
    ensure(stored == game.report, || "stored report differs from the delivered one".into())?;
    ensure(game.latency.p99_millis < 250, || format!("p99 {} ms", game.latency.p99_millis))?;
    ensure(took < Duration::from_secs(60), || format!("took {took:.2?}"))?;
    Ok(format!(
        "team {winner} won, p50 {} ms, p99 {} ms over {} samples, {} messages in {took:.2?}",
        game.latency.p50_millis, game.latency.p99_millis, game.latency.samples, game.messages_received
    ))
}

/// Everything that should repeat across runs with the same seed, keyed by bot.
#[derive(Debug, PartialEq)]
struct Replay {
    winner: Option<u8>,
    attempts: Vec<(usize, u32, u32)>,
    tasks: Vec<(String, String, u32, Option<usize>)>,
}

fn replay(game: &GameSummary) -> Replay {
    let bot_of: BTreeMap<_, _> = game.bots.iter().map(|b| (b.player_id, b.bot)).collect();
    let mut attempts: Vec<_> = game.bots.iter().map(|b| (b.bot, b.stats.attempts, b.stats.corrects)).collect();
    attempts.sort();
    Replay {
        winner: game.winner,
        attempts,
        tasks: game
            .report
            .tasks
            .iter()
            .map(|t| (t.task_id.clone(), t.question_id.clone(), t.attempts, t.completed_by.map(|p| bot_of[&p])))
            .collect(),
    }
}

async fn wrong_then_right() -> Outcome {
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let server = server(dir.path()).await;
        let mut config = sim(&server);
        config.teams = 1;
        config.players = 3;
        config.tasks = 6;
        config.accuracy = 0.0;
        config.cooldown_millis = 1_000;
        let game = one_game(config).await;
        server.shutdown().await;
        let game = game?;
        failed_assertions(&game)?;
        for t in &game.report.tasks {
            ensure(t.attempts == 2, || format!("task {} took {} attempts", t.task_id, t.attempts))?;
        }
        runs.push(replay(&game));
    }
    ensure(runs[0] == runs[1], || format!("runs differ: {:?} vs {:?}", runs[0], runs[1]))?;
    let total: u32 = runs[0].attempts.iter().map(|a| a.1).sum();
    Ok(format!("{} tasks at 2 attempts each, {total} submissions, identical on rerun", runs[0].tasks.len()))
}

async fn admin_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let server = server(dir.path()).await;
    let mut config = sim(&server);
    config.teams = 2;
    config.players = 3;
    config.admin_end_after = Some(1);
    let game = one_game(config).await;
    server.shutdown().await;
    let game = game?;
    failed_assertions(&game)?;
    ensure(game.winner.is_none(), || format!("winner {:?}", game.winner))?;
    ensure(game.end_reason == EndReason::AdminEnd, || format!("ended by {:?}", game.end_reason))?;
    ensure(game.bots.iter().all(|b| b.stats.game_overs == 1), || "a bot missed game_over".into())?;
    let r = &game.report;
    ensure(r.finish_order.iter().all(|e| e.outcome == FinishOutcome::DidNotFinish), || "a team finished".into())?;
    let total = r.config.tasks_per_team;
    ensure(r.finish_order.iter().all(|e| e.completed < total), || "a team completed every task".into())?;
    let stored = stored_report(&dir.path().join("reports"), &game.game_code)?;
    ensure(&stored == r, || "stored report differs from the delivered one".into())?;
    let done: u32 = r.finish_order.iter().map(|e| e.completed).sum();
    Ok(format!("ended with {done} tasks done and no winner"))
}

fn main() -> ExitCode {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let criteria: Vec<Criterion> = vec![
        ("1 grading enumeration", Box::new(grading)),
        ("2 engine invariants", Box::new(engine)),
        ("3 codec round trips", Box::new(codec)),
        ("4 answer hiding", Box::new(|| rt.block_on(answer_hiding()))),
        ("5 full simulated game", Box::new(|| rt.block_on(full_game()))),
        ("6 wrong then right", Box::new(|| rt.block_on(wrong_then_right()))),
        ("7 admin end", Box::new(|| rt.block_on(admin_end()))),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failures += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
