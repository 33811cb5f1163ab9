//! Volume-dependent quote curves and the simulated mid-price.
//!
//! A market on a time grid is described by two curves in the signed order
//! size `y` (shares; `y > 0` buys, `y < 0` sells):
//!
//! ```text
//! A(t, y)   ask: price per share paid when buying y shares at once
//! B(t, y)   bid: price per share received when selling |y| shares
//! M(t, y) = (A(t, y) + B(t, y)) / 2        quoted mid
//! P(t, y) = A(t, y) - B(t, y)              quoted spread
//! ```
//!
//! The linear family has `A(t, y) = gamma_t * y + M(t, 0)` and
//! `B(t, y) = delta_t * y + M(t, 0)`, so the marginal quotes at `y = 0`
//! collapse to the mid and `P(t, 0) = 0`. Quotes are evaluated as given
//! and never clamped: a curve that produces non-positive prices is
//! reported by [`check_assumptions`], not silently altered.
//!
//! Round trips lose money exactly when both curves slope upward
//! (`dA/dy > 0`, `dB/dy > 0`); [`check_assumptions`] probes that
//! condition, together with the ordering `A > B` for `y > 0`, over a grid
//! of `(t, y)` points.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::math;
use crate::partition::Partition;
use crate::rng::stream_rng;

/// Errors from curve construction and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum MarketError {
    /// Grid index past the end of the curve's time dimension.
    IndexOutOfRange { index: usize, len: usize },
    /// Tabulated curve queried outside its tabulated volume range.
    VolumeOutOfRange { y: f64, min: f64, max: f64 },
    /// Structural defect in curve data (mismatched lengths, bad volume grid).
    BadCurve(&'static str),
    /// Invalid simulation parameters.
    BadParams(&'static str),
}

impl fmt::Display for MarketError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::IndexOutOfRange { index, len } => {
                write!(f, "grid index {index} out of range (length {len})")
            }
            Self::VolumeOutOfRange { y, min, max } => {
                write!(f, "volume {y} outside tabulated range [{min}, {max}]")
            }
            Self::BadCurve(msg) => write!(f, "bad curve: {msg}"),
            Self::BadParams(msg) => write!(f, "bad parameters: {msg}"),
        }
    }
}

impl core::error::Error for MarketError {}

/// Quotes and one-sided slopes at a single `(t, y)` point.
///
/// `mid` and `spread` always satisfy `mid = (ask + bid) / 2` and
/// `spread = ask - bid` exactly as computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuoteSet {
    pub ask: f64,
    pub bid: f64,
    pub mid: f64,
    pub spread: f64,
    /// dA/dy at `y`, taken on the side the order walks.
    pub ask_slope: f64,
    /// dB/dy at `y`, same side convention.
    pub bid_slope: f64,
}

/// Linear quote curves: `A = gamma * y + mid`, `B = delta * y + mid`,
/// one slope pair per grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCurve {
    pub mid: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
}

impl LinearCurve {
    pub fn new(mid: Vec<f64>, gamma: Vec<f64>, delta: Vec<f64>) -> Result<Self, MarketError> {
        if mid.is_empty() {
            return Err(MarketError::BadCurve("empty mid path"));
        }
        if mid.len() != gamma.len() || mid.len() != delta.len() {
            return Err(MarketError::BadCurve("mid, gamma, delta lengths differ"));
        }
        if mid.iter().chain(&gamma).chain(&delta).any(|v| !v.is_finite()) {
            return Err(MarketError::BadCurve("non-finite curve value"));
        }
        Ok(Self { mid, gamma, delta })
    }

    /// Constant slopes over the whole grid.
    pub fn constant_slopes(mid: Vec<f64>, gamma: f64, delta: f64) -> Result<Self, MarketError> {
        let n = mid.len();
        Self::new(mid, vec![gamma; n], vec![delta; n])
    }
}

/// Piecewise-linear tabulated quote curves on a shared volume grid.
///
/// `ask[t][j]` and `bid[t][j]` are the quotes at `volumes[j]`; queries
/// interpolate linearly in `y` and fail outside the tabulated range.
/// Slopes are the slope of the segment on the side the order walks
/// (to the right for `y >= 0`, to the left for `y < 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCurve {
    pub volumes: Vec<f64>,
    pub ask: Vec<Vec<f64>>,
    pub bid: Vec<Vec<f64>>,
}

impl TabulatedCurve {
    pub fn new(volumes: Vec<f64>, ask: Vec<Vec<f64>>, bid: Vec<Vec<f64>>) -> Result<Self, MarketError> {
        if volumes.len() < 2 {
            return Err(MarketError::BadCurve("need at least two tabulated volumes"));
        }
        if volumes.windows(2).any(|w| w[1] <= w[0]) || volumes.iter().any(|v| !v.is_finite()) {
            return Err(MarketError::BadCurve("volume grid must be finite and strictly increasing"));
        }
        if !volumes.contains(&0.0) {
            return Err(MarketError::BadCurve("volume grid must contain 0"));
        }
        if ask.is_empty() || ask.len() != bid.len() {
            return Err(MarketError::BadCurve("ask and bid tables must be non-empty and equal length"));
        }
        for row in ask.iter().chain(bid.iter()) {
            if row.len() != volumes.len() {
                return Err(MarketError::BadCurve("table row length differs from volume grid"));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(MarketError::BadCurve("non-finite table value"));
            }
        }
        Ok(Self { volumes, ask, bid })
    }

    /// Segment index used for a query at `y`: the segment the order walks.
    fn segment(&self, y: f64) -> Result<usize, MarketError> {
        let v = &self.volumes;
        let (min, max) = (v[0], v[v.len() - 1]);
        if !(y >= min && y <= max) {
            return Err(MarketError::VolumeOutOfRange { y, min, max });
        }
        // Largest j with v[j] <= y, then step back from the top node.
        let mut j = match v.binary_search_by(|x| x.total_cmp(&y)) {
            Ok(j) => j,
            Err(ins) => ins - 1,
        };
        if y < 0.0 && v[j] == y {
            // Sell orders walk left: at an interior node use the left segment.
            j = j.saturating_sub(1);
        }
        Ok(j.min(v.len() - 2))
    }

    fn interp(&self, row: &[f64], j: usize, y: f64) -> (f64, f64) {
        let (v0, v1) = (self.volumes[j], self.volumes[j + 1]);
        let slope = (row[j + 1] - row[j]) / (v1 - v0);
        (row[j] + slope * (y - v0), slope)
    }
}

/// Quote curve evaluator: one of the supported curve families.
#[derive(Debug, Clone, PartialEq)]
pub enum SupplyCurve {
    Linear(LinearCurve),
    Tabulated(TabulatedCurve),
}

impl SupplyCurve {
    /// Number of grid times the curve is defined on.
    pub fn len(&self) -> usize {
        match self {
            Self::Linear(c) => c.mid.len(),
            Self::Tabulated(c) => c.ask.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear curve taking mid and slope paths from a market path.
    pub fn linear_from_market(market: &MarketPath) -> Self {
        Self::Linear(LinearCurve {
            mid: market.mid.clone(),
            gamma: market.gamma.clone(),
            delta: market.delta.clone(),
        })
    }
}

/// Quotes, mid, spread and slopes at grid time `t_index` for order size `y`.
pub fn eval_quotes(curve: &SupplyCurve, t_index: usize, y: f64) -> Result<QuoteSet, MarketError> {
    let len = curve.len();
    if t_index >= len {
        return Err(MarketError::IndexOutOfRange { index: t_index, len });
    }
    let (ask, bid, ask_slope, bid_slope) = match curve {
        SupplyCurve::Linear(c) => {
            let m = c.mid[t_index];
            let g = c.gamma[t_index];
            let d = c.delta[t_index];
            (g * y + m, d * y + m, g, d)
        }
        SupplyCurve::Tabulated(c) => {
            let j = c.segment(y)?;
            let (a, ga) = c.interp(&c.ask[t_index], j, y);
            let (b, gb) = c.interp(&c.bid[t_index], j, y);
            (a, b, ga, gb)
        }
    };
    Ok(QuoteSet {
        ask,
        bid,
        mid: 0.5 * (ask + bid),
        spread: ask - bid,
        ask_slope,
        bid_slope,
    })
}

/// Kinds of regularity violations found by [`check_assumptions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// dA/dy <= 0 at the probe: buying more does not raise the ask.
    AskSlopeNotPositive,
    /// dB/dy <= 0 at the probe.
    BidSlopeNotPositive,
    /// A < B at a probe with y > 0: quotes are inverted.
    SpreadInverted,
}

/// One failed probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionViolation {
    pub t_index: usize,
    pub y: f64,
    pub kind: ViolationKind,
}

/// Result of probing curve regularity on a `(t, y)` grid.
///
/// Violations are data, not errors: a report with entries is still a
/// successful check. `nonpositive_quotes` lists probes where an evaluated
/// ask or bid was `<= 0`; such quotes are mathematically admissible in the
/// model and are surfaced rather than clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub violations: Vec<AssumptionViolation>,
    pub nonpositive_quotes: Vec<(usize, f64)>,
    /// Number of `(t, y)` points probed.
    pub probes: usize,
}

impl AssumptionReport {
    /// True when no monotonicity or ordering violation was found.
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Probes `dA/dy > 0`, `dB/dy > 0` and `A > B` for `y > 0` at every grid
/// time and every probe volume. The probe set is always extended with
/// `y = 0` so marginal slopes are covered.
///
/// `A = B` at some `y > 0` (a zero-spread economy, e.g. linear with
/// `gamma = delta`) is on the boundary and is not reported; only a strict
/// inversion `A < B` is.
pub fn check_assumptions(curve: &SupplyCurve, y_probes: &[f64]) -> AssumptionReport {
    let mut probes: Vec<f64> = y_probes.iter().copied().filter(|y| y.is_finite()).collect();
    if !probes.contains(&0.0) {
        probes.push(0.0);
    }
    let mut violations = Vec::new();
    let mut nonpositive = Vec::new();
    let mut count = 0usize;
    for t in 0..curve.len() {
        for &y in &probes {
            let q = match eval_quotes(curve, t, y) {
                Ok(q) => q,
                // Out-of-range probes on tabulated curves are skipped, not
                // failed: the probe grid may be wider than the table.
                Err(_) => continue,
            };
            count += 1;
            if q.ask_slope <= 0.0 {
                violations.push(AssumptionViolation { t_index: t, y, kind: ViolationKind::AskSlopeNotPositive });
            }
            if q.bid_slope <= 0.0 {
                violations.push(AssumptionViolation { t_index: t, y, kind: ViolationKind::BidSlopeNotPositive });
            }
            if y > 0.0 && q.ask < q.bid {
                violations.push(AssumptionViolation { t_index: t, y, kind: ViolationKind::SpreadInverted });
            }
            if q.ask <= 0.0 || q.bid <= 0.0 {
                nonpositive.push((t, y));
            }
        }
    }
    AssumptionReport { violations, nonpositive_quotes: nonpositive, probes: count }
}

/// Geometric Brownian motion parameters for the marginal mid `M(t, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmParams {
    /// Drift, per unit time.
    pub mu: f64,
    /// Volatility, per square root of unit time.
    pub sigma: f64,
    /// Initial mid `M(0, 0)`, must be positive.
    pub initial_mid: f64,
}

/// Deterministic linear ramp for a slope path: `start` at `t = 0`,
/// `end` at the horizon. Equal endpoints give a constant slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeRamp {
    pub start: f64,
    pub end: f64,
}

impl SlopeRamp {
    pub const fn constant(v: f64) -> Self {
        Self { start: v, end: v }
    }

    fn at(&self, frac: f64) -> f64 {
        self.start + (self.end - self.start) * frac
    }
}

/// Sampled mid-price path with its slope paths.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPath {
    pub grid: Partition,
    /// Marginal mid `M(t, 0)` per grid time; strictly positive.
    pub mid: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
    pub params: Option<GbmParams>,
    /// `(seed, stream)` that produced the mid path, when simulated.
    pub seed: Option<(u64, u64)>,
}

impl MarketPath {
    /// Wraps explicit paths (e.g. tabulated market data or test fixtures).
    pub fn from_parts(
        grid: Partition,
        mid: Vec<f64>,
        gamma: Vec<f64>,
        delta: Vec<f64>,
    ) -> Result<Self, MarketError> {
        if mid.len() != grid.len() || gamma.len() != grid.len() || delta.len() != grid.len() {
            return Err(MarketError::BadCurve("path lengths differ from grid length"));
        }
        if mid.iter().any(|&m| !(m.is_finite() && m > 0.0)) {
            return Err(MarketError::BadParams("mid values must be strictly positive and finite"));
        }
        Ok(Self { grid, mid, gamma, delta, params: None, seed: None })
    }
}

/// Simulates the marginal mid as a geometric Brownian motion with exact
/// log-normal transitions over each grid cell (no Euler error in the
/// marginal law), and fills the slope paths from the given ramps.
///
/// Identical `(params, grid, seed, stream)` always produce a bit-identical
/// path; independent paths of one experiment use one stream each (see
/// [`crate::rng`]).
pub fn simulate_mid_gbm(
    params: GbmParams,
    grid: &Partition,
    seed: u64,
    stream: u64,
    gamma: SlopeRamp,
    delta: SlopeRamp,
) -> Result<MarketPath, MarketError> {
    if !(params.initial_mid.is_finite() && params.initial_mid > 0.0) {
        return Err(MarketError::BadParams("initial mid must be strictly positive"));
    }
    if !(params.sigma.is_finite() && params.sigma >= 0.0) {
        return Err(MarketError::BadParams("sigma must be non-negative and finite"));
    }
    if !params.mu.is_finite() {
        return Err(MarketError::BadParams("mu must be finite"));
    }
    let times = grid.times();
    let horizon = grid.horizon();
    let mut rng = stream_rng(seed, stream);
    let n = times.len();
    let mut mid = Vec::with_capacity(n);
    let mut gamma_path = Vec::with_capacity(n);
    let mut delta_path = Vec::with_capacity(n);
    let mut m = params.initial_mid;
    mid.push(m);
    gamma_path.push(gamma.at(0.0));
    delta_path.push(delta.at(0.0));
    for i in 1..n {
        let dt = times[i] - times[i - 1];
        let z: f64 = rng.sample(StandardNormal);
        let log_step = (params.mu - 0.5 * params.sigma * params.sigma) * dt
            + params.sigma * math::sqrt(dt) * z;
        m *= math::exp(log_step);
        mid.push(m);
        let frac = times[i] / horizon;
        gamma_path.push(gamma.at(frac));
        delta_path.push(delta.at(frac));
    }
    Ok(MarketPath {
        grid: grid.clone(),
        mid,
        gamma: gamma_path,
        delta: delta_path,
        params: Some(params),
        seed: Some((seed, stream)),
    })
}
