//! Simulation of trading under volume-dependent bid/ask quote curves.
//!
//! At each grid time the cost of trading `y` shares at once is set by a
//! pair of supply curves: buying `y > 0` shares pays the ask `A(t, y)` per
//! share, selling receives the bid `B(t, y)`. The mid `M = (A + B) / 2`
//! and spread `P = A - B` measure execution quality against an
//! infinitesimally small order, whose price is the marginal mid `M(t, 0)`.
//! With upward-sloping curves every round trip loses money, and the losses
//! of a self-financing portfolio aggregate into a non-decreasing cost
//! process driven by the quadratic variation of the holdings path.
//!
//! Module map:
//! * [`market`] — quote curves, regularity checks, exact GBM mid simulation
//! * [`partition`] — refining time grids and pathwise quadratic variation
//! * [`portfolio`] — the exact discrete self-financing ledger and its cost
//!   decomposition
//! * [`continuous`] — the continuous-time cost process and portfolio value
//!   as partition limits
//! * [`hedging`] — Black-Scholes delta hedging on linear quote curves,
//!   with mollified (smoothed) hedges
//! * [`diagnostics`] — supermartingale and arbitrage Monte Carlo probes
//!
//! The crate is `no_std` (plus `alloc`); every float transcendental goes
//! through [`libm`] so paths and reports are bit-identical across
//! platforms. File IO, config parsing and the batch runner live in the
//! companion `quotecurve-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod continuous;
pub mod diagnostics;
pub mod hedging;
pub mod market;
pub mod partition;
pub mod portfolio;
pub mod rng;

mod math;

/// Crate version, recorded by the CLI in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Sign convention used throughout: `sgn(x) = 1` for `x > 0`, `0` for
/// `x = 0`, `-1` for `x < 0`.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
