//! Seed splitting. One master seed per run yields an independent ChaCha
//! stream per consumer, so enabling one component never shifts the random
//! numbers another component sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Env = 1,
    Init = 2,
    Safety = 3,
    Explore = 4,
    Replay = 5,
}

pub fn stream(master_seed: u64, which: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(which as u64);
    rng
}
