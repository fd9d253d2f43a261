//! Seeded random streams shared by every stochastic component.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream for ant `ant` in iteration `iteration`; distinct pairs never collide.
pub fn ant_stream(seed: u64, iteration: u64, ant: u64) -> ChaCha8Rng {
    debug_assert!(ant < 1 << 32 && iteration < 1 << 32);
    stream(seed, (iteration << 32) | ant)
}
