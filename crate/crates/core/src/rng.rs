//! Deterministic counter-based seed splitting.
//!
//! Every randomized routine in the crate takes a single 64-bit seed and
//! derives one independent generator per logical unit (sample row,
//! permutation, restart, replicate) via the ChaCha stream counter. Results
//! are therefore order-independent and safe to compute in parallel.

use rand::SeedableRng;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

/// Generator for logical unit `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw an index from an unnormalized nonnegative weight vector.
///
/// Inverse-CDF draw; the last positive-weight index absorbs any rounding
/// slack so the draw is total whenever some weight is positive.
pub fn draw_categorical<R: rand::Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0, "draw_categorical needs positive total mass");
    let u: f64 = rng.random_range(0.0..1.0) * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        acc += w;
        if u < acc {
            return i;
        }
    }
    last_positive
}
