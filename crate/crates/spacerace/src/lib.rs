//! Networked host for SpaceRace games and the bot harness that exercises it.
//!
//! The rules live in `spacerace-core`; this crate adds sockets, clocks,
//! files and command lines.

pub mod config;
pub mod conn;
pub mod game;
pub mod library;
pub mod registry;
pub mod server;
pub mod sim;

pub use config::ServerConfig;
pub use server::{bind, run_server, RunningServer, StartupError};
