//! Server settings from flags and `SPACERACE_*` environment variables.

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;

#[derive(Debug, Clone, Parser)]
#[command(name = "spacerace-server", version, about = "Hosts SpaceRace quiz-race games over WebSocket")]
pub struct ServerConfig {
    /// Address for HTTP: static client files at "/" and the WebSocket at "/ws".
    #[arg(long, env = "SPACERACE_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,

    /// Question bank library, one `<name>.json` per bank.
    #[arg(long, env = "SPACERACE_BANKS", default_value = "data/banks")]
    pub banks: PathBuf,

    /// Map library, one `<name>.json` per map. "default" is built in.
    #[arg(long, env = "SPACERACE_MAPS", default_value = "data/maps")]
    pub maps: PathBuf,

    /// Where finished game reports are written.
    #[arg(long, env = "SPACERACE_REPORTS", default_value = "data/reports")]
    pub reports: PathBuf,

    #[arg(long, env = "SPACERACE_MAX_GAMES", default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_games: u32,

    /// Also accept newline-delimited JSON over plain TCP on this port.
    #[arg(long, env = "SPACERACE_BOT_TCP_PORT")]
    pub bot_tcp_port: Option<u16>,

    /// Games with no input for this long are closed.
    #[arg(long, env = "SPACERACE_IDLE_TIMEOUT_MS", default_value_t = 3_600_000)]
    pub idle_timeout_ms: u64,

    /// Static files served at "/".
    #[arg(long, env = "SPACERACE_WEB_ROOT", default_value = "web")]
    pub web_root: PathBuf,

    /// Tracing filter, e.g. "info" or "spacerace=debug".
    #[arg(long, env = "SPACERACE_LOG_LEVEL", default_value = "info")]
    pub log_level: String,
}

impl ServerConfig {
    /// Defaults with every directory under `root` and ephemeral ports, for
    /// tests and embedding.
    pub fn local(root: &std::path::Path) -> Self {
        Self {
            listen: "127.0.0.1:0".parse().expect("literal address"),
            banks: root.join("banks"),
            maps: root.join("maps"),
            reports: root.join("reports"),
            max_games: 64,
            bot_tcp_port: None,
            idle_timeout_ms: 3_600_000,
            web_root: root.join("web"),
            log_level: "info".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_flags() {
        let c = ServerConfig::parse_from(["spacerace-server"]);
        assert_eq!(c.max_games, 64);
        assert_eq!(c.idle_timeout_ms, 3_600_000);
        assert_eq!(c.bot_tcp_port, None);
        let c = ServerConfig::parse_from(["spacerace-server", "--listen", "0.0.0.0:9000", "--bot-tcp-port", "9001"]);
        assert_eq!(c.listen.port(), 9000);
        assert_eq!(c.bot_tcp_port, Some(9001));
        assert!(ServerConfig::try_parse_from(["spacerace-server", "--max-games", "0"]).is_err());
    }
}
