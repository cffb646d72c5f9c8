//! Seeded random streams.
//!
//! All randomness comes from ChaCha20 seeded with a 64-bit seed. Independent
//! trials use the same seed on distinct ChaCha streams: the stream number for
//! grid cell `c` and trial `t` is `(c << 32) | t`. Streams never overlap, so a
//! trial's draws do not depend on how many other trials ran or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type FpsRng = ChaCha20Rng;

pub fn seeded(seed: u64) -> FpsRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Stream for trial `trial` of grid cell `cell`.
pub fn trial_stream(seed: u64, cell: u32, trial: u32) -> FpsRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((cell as u64) << 32) | trial as u64);
    rng
}
