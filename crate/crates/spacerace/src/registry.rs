//! Hosted games by code.

use std::collections::HashMap;

use rand::Rng;
use spacerace_core::protocol::PhaseHint;
use tokio::sync::{mpsc, watch};

use crate::game::GameCommand;

/// Upper-case letters and digits without the look-alikes 0, O, 1 and I.
pub const CODE_ALPHABET: &[u8] = b"ABCDEFGHJKLMNPQRSTUVWXYZ23456789";
pub const CODE_LEN: usize = 6;

pub fn new_game_code(rng: &mut impl Rng) -> String {
    (0..CODE_LEN).map(|_| CODE_ALPHABET[rng.gen_range(0..CODE_ALPHABET.len())] as char).collect()
}

/// 128 random bits as 32 lowercase hex digits.
pub fn new_secret(rng: &mut impl Rng) -> String {
    format!("{:032x}", rng.gen::<u128>())
}

/// What connection handlers need to reach a game.
#[derive(Debug, Clone)]
pub struct GameHandle {
    pub code: String,
    pub admin_token: String,
    pub commands: mpsc::UnboundedSender<GameCommand>,
    pub phase: watch::Receiver<PhaseHint>,
}

#[derive(Debug, thiserror::Error)]
#[error("the server already hosts {0} games")]
pub struct CapacityReached(pub usize);

#[derive(Debug)]
pub struct Registry {
    games: HashMap<String, GameHandle>,
    capacity: usize,
}

impl Registry {
    pub fn new(capacity: usize) -> Self {
        Self { games: HashMap::new(), capacity }
    }

    pub fn len(&self) -> usize {
        self.games.len()
    }

    pub fn is_empty(&self) -> bool {
        self.games.is_empty()
    }

    pub fn get(&self, code: &str) -> Option<&GameHandle> {
        self.games.get(code)
    }

    /// Picks an unused code and registers whatever `build` makes of it.
    pub fn register<E>(
        &mut self,
        rng: &mut impl Rng,
        build: impl FnOnce(String) -> Result<GameHandle, E>,
    ) -> Result<GameHandle, E>
    where
        E: From<CapacityReached>,
    {
        if self.games.len() >= self.capacity {
            return Err(CapacityReached(self.capacity).into());
        }
        let code = loop {
            let code = new_game_code(rng);
            if !self.games.contains_key(&code) {
                break code;
            }
        };
        let handle = build(code.clone())?;
        self.games.insert(code, handle.clone());
        Ok(handle)
    }

    pub fn remove(&mut self, code: &str) -> Option<GameHandle> {
        self.games.remove(code)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use std::collections::HashSet;

    fn handle(code: String) -> Result<GameHandle, CapacityReached> {
        let (commands, _) = mpsc::unbounded_channel();
        let (_, phase) = watch::channel(PhaseHint::Lobby);
        Ok(GameHandle { code, admin_token: String::new(), commands, phase })
    }

    #[test]
    fn codes_use_the_unambiguous_alphabet() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let code = new_game_code(&mut rng);
            assert_eq!(code.len(), CODE_LEN);
            assert!(code.bytes().all(|b| CODE_ALPHABET.contains(&b)), "{code}");
            assert!(!code.contains(['0', 'O', '1', 'I']));
        }
    }

    #[test]
    fn ten_thousand_registrations_get_distinct_codes() {
        let mut registry = Registry::new(10_000);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let codes: HashSet<String> = (0..10_000).map(|_| registry.register(&mut rng, handle).unwrap().code).collect();
        assert_eq!(codes.len(), 10_000);
        assert_eq!(registry.len(), 10_000);
    }

    #[test]
    fn capacity_is_enforced() {
        let mut registry = Registry::new(64);
        let mut rng = rand::thread_rng();
        for _ in 0..64 {
            registry.register(&mut rng, handle).unwrap();
        }
        assert!(registry.register(&mut rng, handle).is_err());
        let code = registry.games.keys().next().unwrap().clone();
        registry.remove(&code);
        assert!(registry.register(&mut rng, handle).is_ok());
    }

    #[test]
    fn secrets_are_128_bit_hex() {
        let s = new_secret(&mut rand::thread_rng());
        assert_eq!(s.len(), 32);
        assert!(s.bytes().all(|b| b.is_ascii_hexdigit()));
    }
}
