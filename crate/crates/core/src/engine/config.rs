use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::EngineError;

pub const MAX_TEAMS: u8 = 4;
pub const MAX_PLAYERS_PER_TEAM: u8 = 10;
pub const DEFAULT_COOLDOWN_MILLIS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GameConfig {
    pub teams: u8,
    pub max_players_per_team: u8,
    pub tasks_per_team: u32,
    #[serde(default = "default_cooldown")]
    pub cooldown_millis: u64,
    #[serde(default = "default_energy")]
    pub energy_per_task: u32,
    pub rng_seed: u64,
    pub bank_ref: String,
    pub map_ref: String,
}

fn default_cooldown() -> u64 {
    DEFAULT_COOLDOWN_MILLIS
}

fn default_energy() -> u32 {
    1
}

impl GameConfig {
    pub fn new(teams: u8, max_players_per_team: u8, tasks_per_team: u32, rng_seed: u64) -> Self {
        Self {
            teams,
            max_players_per_team,
            tasks_per_team,
            cooldown_millis: DEFAULT_COOLDOWN_MILLIS,
            energy_per_task: 1,
            rng_seed,
            bank_ref: String::new(),
            map_ref: String::new(),
        }
    }

    /// Static bounds only; the bank size check happens at game creation.
    pub fn validate(&self) -> Result<(), EngineError> {
        let invalid = |field: &'static str, rule: &'static str| Err(EngineError::ConfigInvalid { field, rule });
        if self.teams == 0 || self.teams > MAX_TEAMS {
            return invalid("teams", "must be within 1..4");
        }
        if self.max_players_per_team == 0 || self.max_players_per_team > MAX_PLAYERS_PER_TEAM {
            return invalid("maxPlayersPerTeam", "must be within 1..10");
        }
        if self.tasks_per_team == 0 {
            return invalid("tasksPerTeam", "must be at least 1");
        }
        if self.energy_per_task == 0 {
            return invalid("energyPerTask", "must be at least 1");
        }
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        self.teams as usize * self.max_players_per_team as usize
    }

    /// Energy a team holds once every task is done.
    pub fn energy_goal(&self) -> u64 {
        u64::from(self.energy_per_task) * u64::from(self.tasks_per_team)
    }
}
