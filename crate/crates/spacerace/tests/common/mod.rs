#![allow(dead_code)]

use std::path::Path;
use std::time::Duration;

use spacerace::sim::{practice_bank, Client, ServerAddr};
use spacerace::{RunningServer, ServerConfig};
use spacerace_core::protocol::{AdminCreateGame, AdminGame, GameCreated, GameRequest, Payload, WireMessage};
use spacerace_core::question::{Question, QuestionBank, QuestionBody};

pub const WAIT: Duration = Duration::from_secs(10);

pub async fn start(root: &Path) -> RunningServer {
    start_with(ServerConfig::local(root)).await
}

pub async fn start_with(config: ServerConfig) -> RunningServer {
    spacerace::bind(config).await.expect("server starts")
}

pub async fn connect(server: &RunningServer) -> Client {
    Client::connect(&ServerAddr::WebSocket(server.ws_url())).await.expect("connects")
}

/// Next message within [`WAIT`]; `None` if the server closed the connection.
pub async fn next(client: &mut Client) -> Option<WireMessage> {
    tokio::time::timeout(WAIT, client.recv()).await.expect("message in time").expect("valid frame")
}

/// Skips messages until `pick` accepts one.
pub async fn until<T>(client: &mut Client, mut pick: impl FnMut(&Payload) -> Option<T>) -> T {
    loop {
        let m = next(client).await.expect("connection open");
        if let Some(found) = pick(&m.payload) {
            return found;
        }
    }
}

pub async fn error_code(client: &mut Client) -> String {
    until(client, |p| match p {
        Payload::Error(e) => Some(e.code.clone()),
        _ => None,
    })
    .await
}

pub fn request(teams: u8, players: u8, tasks: u32) -> GameRequest {
    GameRequest {
        teams,
        max_players_per_team: players,
        tasks_per_team: tasks,
        cooldown_millis: 1_000,
        energy_per_task: 1,
        rng_seed: Some(5),
        map_name: None,
    }
}

pub fn create(config: GameRequest, bank: QuestionBank) -> AdminCreateGame {
    AdminCreateGame { config, bank_name: None, bank: Some(bank) }
}

pub async fn host(admin: &mut Client, config: GameRequest, bank: QuestionBank) -> AdminGame {
    admin.send(create(config, bank)).await.unwrap();
    let GameCreated { game_code, admin_token } = until(admin, |p| match p {
        Payload::GameCreated(g) => Some(g.clone()),
        _ => None,
    })
    .await;
    AdminGame { game_code, admin_token }
}

pub fn default_bank() -> QuestionBank {
    practice_bank(8)
}

/// Numeric questions "What is i + 1?" so tests know every answer.
pub fn numeric_bank(n: usize) -> QuestionBank {
    QuestionBank::new(
        "sums",
        (0..n)
            .map(|i| Question {
                id: format!("s{i}"),
                prompt: format!("What is {i} + 1?"),
                body: QuestionBody::Numeric { answer: (i + 1) as f64, tolerance: 0.0 },
            })
            .collect(),
    )
}

/// 3×3 map whose only station sits in the middle, in reach of every spawn.
pub const TINY_MAP: &str = r#"{
  "width": 3, "height": 3, "blocked": [],
  "stations": [{"id": 0, "cell": [1, 1]}],
  "spawns": [[[0, 0]], [[2, 0]], [[0, 2]], [[2, 2]]]
}"#;

pub fn install_tiny_map(root: &Path) {
    std::fs::create_dir_all(root.join("maps")).unwrap();
    std::fs::write(root.join("maps/tiny.json"), TINY_MAP).unwrap();
}
