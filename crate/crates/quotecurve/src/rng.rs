//! Deterministic stream derivation for parallel Monte Carlo.
//!
//! Every random draw in the crate comes from a counter-based ChaCha8
//! generator addressed by `(seed, stream)`. The seed identifies the
//! experiment; the stream identifies one independent consumer inside it
//! (one market path, one generated strategy, one random partition).
//! Work units keyed this way can be computed in any order, on any number
//! of workers, and still produce identical output.
//!
//! Stream ids are namespaced so consumers of different kinds never collide:
//! a market path `p` uses `MARKET_STREAM + p`, a strategy `k` uses
//! `STRATEGY_STREAM + k`, and so on. Indices stay far below the `1 << 40`
//! namespace width in practice.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Namespace for simulated market (mid-price) paths.
pub const MARKET_STREAM: u64 = 1 << 40;
/// Namespace for generated trading strategies.
pub const STRATEGY_STREAM: u64 = 2 << 40;
/// Namespace for random partitions.
pub const PARTITION_STREAM: u64 = 3 << 40;

/// Generator for the given `(seed, stream)` pair.
///
/// Distinct streams under one seed are independent ChaCha counter streams;
/// the same pair always yields the same draws.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
