//! Small simulated games over both transports.

mod common;

use spacerace::sim::{run_simulation, ServerAddr, SimConfig};
use spacerace::ServerConfig;

fn small(server: ServerAddr) -> SimConfig {
    let mut c = SimConfig::new(server);
    c.teams = 2;
    c.players = 2;
    c.tasks = 4;
    c.accuracy = 1.0;
    c.cooldown_millis = 500;
    c
}

#[tokio::test(flavor = "multi_thread")]
async fn perfect_play_finishes_over_websocket() {
    let dir = tempfile::tempdir().unwrap();
    let server = common::start(dir.path()).await;
    let report = run_simulation(small(ServerAddr::WebSocket(server.ws_url()))).await.unwrap();
    let game = &report.games[0];
    assert!(report.passed, "{:#?}", game.assertions);
    let winner = game.winner.expect("a winner");
    let done = game.report.tasks.iter().filter(|t| t.team == winner && t.completed_by.is_some()).count();
    assert_eq!(done, 4);
    assert!(game.bots.iter().all(|b| b.stats.attempts == b.stats.corrects));
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn line_tcp_transport_plays_the_same_game() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ServerConfig::local(dir.path());
    config.bot_tcp_port = Some(0);
    let server = common::start_with(config).await;
    let addr = ServerAddr::Tcp(server.tcp_addr().unwrap().to_string());
    let mut sim = small(addr);
    sim.games = 2;
    sim.parallel = true;
    let report = run_simulation(sim).await.unwrap();
    assert!(report.passed, "{:#?}", report.games[0].assertions);
    assert_eq!(report.games.len(), 2);
    assert_ne!(report.games[0].game_code, report.games[1].game_code);
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn unreachable_server_is_a_connect_failure() {
    let sim = small(ServerAddr::WebSocket("ws://127.0.0.1:1/ws".into()));
    let err = run_simulation(sim).await.unwrap_err();
    assert!(matches!(err, spacerace::sim::SimError::ConnectFailure { .. }), "{err}");
}

#[test]
fn settings_are_checked() {
    let mut c = small(ServerAddr::Tcp("127.0.0.1:9".into()));
    c.accuracy = 1.5;
    assert!(c.validate().is_err());
    c.accuracy = 0.5;
    c.teams = 5;
    assert!(c.validate().is_err());
}
