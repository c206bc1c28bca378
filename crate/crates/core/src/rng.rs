use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// ChaCha is platform independent, which replays rely on.
pub(crate) fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
