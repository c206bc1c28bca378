use std::process::ExitCode;

use clap::Parser;
use spacerace::sim::{run_simulation, SimConfig};

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let config = SimConfig::parse();
    let out = config.out.clone();
    let report = match run_simulation(config).await {
        Ok(r) => r,
        Err(e) => {
            eprintln!("spacerace-sim: {e}");
            return ExitCode::from(2);
        }
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, json + "\n") {
                eprintln!("spacerace-sim: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => println!("{json}"),
    }
    for game in &report.games {
        eprintln!(
            "{}: winner {:?}, {} ms, p99 {} ms, {}",
            game.game_code,
            game.winner,
            game.duration_millis,
            game.latency.p99_millis,
            if game.passed() { "ok" } else { "FAILED" }
        );
        for a in game.assertions.iter().filter(|a| !a.passed) {
            eprintln!("  {}: {}", a.name, a.detail);
        }
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
