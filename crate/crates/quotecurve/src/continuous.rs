//! The continuous-time cost process and portfolio value as partition limits.
//!
//! For a holdings path `Z` under quote curves with slopes `M'(t, y)` (mid)
//! and `P'(t, y)` (spread), the cumulative friction loss is
//!
//! ```text
//! T_t = int M'(s, 0) d[Z, Z]_s
//!     + sum_{s <= t} [M'(s, dZ_s) - M'(s, 0)] (dZ_s)^2 / 2
//!     + int P'(s, 0) y(s) d[Z, Z]_s / 2
//!     + sum_{s <= t} |dZ_s| dZ_s [P'(s, dZ_s) - P'(s, 0)] / 4
//! ```
//!
//! where `y(s)` is the sign of the local increment. Numerically every
//! partition cell contributes one atom built from its increment
//! `dz = Z(t_i+) - Z(t_{i-1}+)` with slopes evaluated at the cell's right
//! endpoint; the atom collapses to
//!
//! ```text
//! dz^2 / 2 * [ w(0) + w(dz) ],    w(y) = M'(t, y) + sgn(dz) P'(t, y) / 2
//! ```
//!
//! For upward-sloping curves `w(y) = (A'(t, y) + B'(t, y)) / 2` up to the
//! sign split, and every atom is non-negative, which makes `T` non-negative
//! and non-decreasing; a negative atom is recorded as an assumption
//! violation instead of being clipped.
//!
//! Two conventions are worth stating explicitly:
//! * Cells are sampled from the right-continuous modification `Z(t+)`, so
//!   a trade exactly at a grid time (including the horizon) is attributed
//!   to that time. On matched grids the finest-level cost then agrees with
//!   the discrete ledger's `total_cost` to machine precision for linear
//!   curves, where the curvature (jump-difference) atoms vanish.
//! * [`qv_stieltjes_integral`] instead uses left-endpoint weights,
//!   the plain Riemann-Stieltjes reading against squared increments; the
//!   two weightings converge to the same limit as the mesh refines.

use alloc::vec::Vec;
use core::fmt;

use crate::market::{eval_quotes, MarketError, MarketPath, SupplyCurve};
use crate::partition::{Partition, PartitionSequence};
use crate::portfolio::StrategyPath;
use crate::sgn;

/// Errors from the partition-limit engines.
#[derive(Debug, Clone, PartialEq)]
pub enum ContinuousError {
    /// Integrand and integrator sampled on different numbers of points.
    LengthMismatch { left: usize, right: usize },
    /// A level's grid time is not a grid time of the strategy.
    TimeNotOnGrid { t: f64 },
    /// Limit diagnostics need at least two levels.
    TooFewLevels { got: usize },
    /// Curve defined on a different number of grid times than the strategy.
    CurveLengthMismatch { curve: usize, grid: usize },
    /// Market and strategy sampled on different grids.
    GridMismatch,
    /// Empty strategy sequence.
    EmptySequence,
    Market(MarketError),
}

impl fmt::Display for ContinuousError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LengthMismatch { left, right } => {
                write!(f, "sampled paths have different lengths ({left} vs {right})")
            }
            Self::TimeNotOnGrid { t } => write!(f, "time {t} is not on the strategy grid"),
            Self::TooFewLevels { got } => write!(f, "need at least 2 levels, got {got}"),
            Self::CurveLengthMismatch { curve, grid } => {
                write!(f, "curve has {curve} grid times, strategy grid has {grid}")
            }
            Self::GridMismatch => write!(f, "market and strategy grids differ"),
            Self::EmptySequence => write!(f, "strategy sequence is empty"),
            Self::Market(e) => write!(f, "market error: {e}"),
        }
    }
}

impl core::error::Error for ContinuousError {}

impl From<MarketError> for ContinuousError {
    fn from(e: MarketError) -> Self {
        Self::Market(e)
    }
}

/// Left-endpoint Riemann sum `sum f(t_{i-1}) (g(t_i) - g(t_{i-1}))` over
/// one grid: the elementary Ito-integral approximation.
pub fn ito_integral(integrand: &[f64], integrator: &[f64]) -> Result<f64, ContinuousError> {
    if integrand.len() != integrator.len() {
        return Err(ContinuousError::LengthMismatch { left: integrand.len(), right: integrator.len() });
    }
    if integrand.is_empty() {
        return Err(ContinuousError::LengthMismatch { left: 0, right: 0 });
    }
    let mut acc = 0.0;
    for i in 1..integrand.len() {
        acc += integrand[i - 1] * (integrator[i] - integrator[i - 1]);
    }
    Ok(acc)
}

/// One level of a Stieltjes-against-squared-increments report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StieltjesLevel {
    pub cells: usize,
    pub mesh: f64,
    pub value: f64,
    /// Gap to the previous level; NaN on the coarsest.
    pub gap: f64,
}

/// Per-level values of `int w d[Z, Z]` with a Cauchy-gap error proxy.
#[derive(Debug, Clone, PartialEq)]
pub struct StieltjesReport {
    pub levels: Vec<StieltjesLevel>,
    pub limit: f64,
    pub cauchy_gap: f64,
}

/// Integral of a weight against the strategy's squared increments:
/// per level `sum w(t_{i-1}) (Z(t_i+) - Z(t_{i-1}+))^2`.
///
/// `weight` is sampled on the strategy grid (right-continuous); level
/// times must lie on the strategy grid, which nested dyadic grids satisfy
/// exactly. With `weight == 1` this reproduces the quadratic variation of
/// the right-sampled path; for left-continuous strategies no co-jump
/// correction is needed.
pub fn qv_stieltjes_integral(
    weight: &[f64],
    strategy: &StrategyPath,
    seq: &PartitionSequence,
) -> Result<StieltjesReport, ContinuousError> {
    if weight.len() != strategy.grid.len() {
        return Err(ContinuousError::LengthMismatch { left: weight.len(), right: strategy.grid.len() });
    }
    if seq.levels().len() < 2 {
        return Err(ContinuousError::TooFewLevels { got: seq.levels().len() });
    }
    let mut levels = Vec::with_capacity(seq.levels().len());
    let mut prev: Option<f64> = None;
    for part in seq.levels() {
        let times = part.times();
        let mut acc = 0.0;
        let mut last_idx = index_on(&strategy.grid, times[0])?;
        for &t in &times[1..] {
            let idx = index_on(&strategy.grid, t)?;
            let dz = strategy.holdings[idx] - strategy.holdings[last_idx];
            acc += weight[last_idx] * dz * dz;
            last_idx = idx;
        }
        let gap = match prev {
            Some(p) => (acc - p).abs(),
            None => f64::NAN,
        };
        levels.push(StieltjesLevel { cells: part.cells(), mesh: part.mesh(), value: acc, gap });
        prev = Some(acc);
    }
    let limit = levels[levels.len() - 1].value;
    let cauchy_gap = levels[levels.len() - 1].gap;
    Ok(StieltjesReport { levels, limit, cauchy_gap })
}

fn index_on(grid: &Partition, t: f64) -> Result<usize, ContinuousError> {
    grid.index_of(t).ok_or(ContinuousError::TimeNotOnGrid { t })
}

/// Cumulative cost process with its four components, on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CostProcessPath {
    pub grid: Partition,
    /// `T_t` per grid time; starts at 0.
    pub total: Vec<f64>,
    /// `int M'(s, 0) d[Z, Z]` part.
    pub mid_slope: Vec<f64>,
    /// Mid-curvature jump corrections.
    pub mid_jump: Vec<f64>,
    /// `int P'(s, 0) y d[Z, Z] / 2` part.
    pub spread_slope: Vec<f64>,
    /// Spread-curvature jump corrections.
    pub spread_jump: Vec<f64>,
    /// True when some atom was negative: the monotone-curve assumption
    /// failed at a traded volume. Atoms are never clipped.
    pub negative_increment: bool,
}

impl CostProcessPath {
    pub fn terminal(&self) -> f64 {
        self.total[self.total.len() - 1]
    }
}

/// One level of the cost-process convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostLevel {
    pub cells: usize,
    pub mesh: f64,
    pub total: f64,
    /// Gap to the previous level; NaN on the coarsest.
    pub gap: f64,
}

/// Finest-level cost path plus per-level terminal values.
#[derive(Debug, Clone, PartialEq)]
pub struct CostProcessReport {
    pub finest: CostProcessPath,
    pub levels: Vec<CostLevel>,
    /// Absolute gap between the two finest levels' terminals.
    pub cauchy_gap: f64,
}

struct Atom {
    mid_slope: f64,
    mid_jump: f64,
    spread_slope: f64,
    spread_jump: f64,
}

impl Atom {
    fn total(&self) -> f64 {
        self.mid_slope + self.mid_jump + self.spread_slope + self.spread_jump
    }
}

/// Cost atom of one increment `dz` priced at grid time `t_index`.
fn cost_atom(curve: &SupplyCurve, t_index: usize, dz: f64) -> Result<Atom, ContinuousError> {
    if dz == 0.0 {
        return Ok(Atom { mid_slope: 0.0, mid_jump: 0.0, spread_slope: 0.0, spread_jump: 0.0 });
    }
    let q0 = eval_quotes(curve, t_index, 0.0)?;
    let qd = eval_quotes(curve, t_index, dz)?;
    let m0 = 0.5 * (q0.ask_slope + q0.bid_slope);
    let md = 0.5 * (qd.ask_slope + qd.bid_slope);
    let p0 = q0.ask_slope - q0.bid_slope;
    let pd = qd.ask_slope - qd.bid_slope;
    let y = sgn(dz);
    let dz2 = dz * dz;
    Ok(Atom {
        mid_slope: m0 * dz2,
        mid_jump: 0.5 * (md - m0) * dz2,
        spread_slope: 0.5 * p0 * y * dz2,
        spread_jump: 0.25 * y * dz2 * (pd - p0),
    })
}

/// Cost process of a strategy under a curve: the finest path lives on the
/// strategy's own grid (one atom per trade), and each level of `seq`
/// contributes a coarser pre-limit total by sampling `Z(t+)` at its times.
///
/// The curve must be defined on the strategy grid; level times must lie on
/// the strategy grid. Assumption violations (negative atoms) are flagged
/// on the result, not raised as errors, so invalid curves can be probed.
pub fn cost_process(
    curve: &SupplyCurve,
    strategy: &StrategyPath,
    seq: &PartitionSequence,
) -> Result<CostProcessReport, ContinuousError> {
    if curve.len() != strategy.grid.len() {
        return Err(ContinuousError::CurveLengthMismatch { curve: curve.len(), grid: strategy.grid.len() });
    }
    let finest = cost_process_on_grid(curve, strategy)?;
    let mut levels = Vec::with_capacity(seq.levels().len());
    let mut prev: Option<f64> = None;
    for part in seq.levels() {
        let times = part.times();
        let mut total = 0.0;
        let mut last_idx = index_on(&strategy.grid, times[0])?;
        for &t in &times[1..] {
            let idx = index_on(&strategy.grid, t)?;
            let dz = strategy.holdings[idx] - strategy.holdings[last_idx];
            total += cost_atom(curve, idx, dz)?.total();
            last_idx = idx;
        }
        let gap = match prev {
            Some(p) => (total - p).abs(),
            None => f64::NAN,
        };
        levels.push(CostLevel { cells: part.cells(), mesh: part.mesh(), total, gap });
        prev = Some(total);
    }
    let cauchy_gap = if levels.len() >= 2 { levels[levels.len() - 1].gap } else { f64::NAN };
    Ok(CostProcessReport { finest, levels, cauchy_gap })
}

/// Finest-grid cost path: one atom per strategy trade, cumulative in time.
pub fn cost_process_on_grid(
    curve: &SupplyCurve,
    strategy: &StrategyPath,
) -> Result<CostProcessPath, ContinuousError> {
    if curve.len() != strategy.grid.len() {
        return Err(ContinuousError::CurveLengthMismatch { curve: curve.len(), grid: strategy.grid.len() });
    }
    let n = strategy.grid.len();
    let mut total = Vec::with_capacity(n);
    let mut mid_slope = Vec::with_capacity(n);
    let mut mid_jump = Vec::with_capacity(n);
    let mut spread_slope = Vec::with_capacity(n);
    let mut spread_jump = Vec::with_capacity(n);
    let mut negative = false;
    total.push(0.0);
    mid_slope.push(0.0);
    mid_jump.push(0.0);
    spread_slope.push(0.0);
    spread_jump.push(0.0);
    for i in 1..n {
        let atom = cost_atom(curve, i, strategy.trade(i))?;
        if atom.total() < 0.0 {
            negative = true;
        }
        mid_slope.push(mid_slope[i - 1] + atom.mid_slope);
        mid_jump.push(mid_jump[i - 1] + atom.mid_jump);
        spread_slope.push(spread_slope[i - 1] + atom.spread_slope);
        spread_jump.push(spread_jump[i - 1] + atom.spread_jump);
        total.push(total[i - 1] + atom.total());
    }
    Ok(CostProcessPath {
        grid: strategy.grid.clone(),
        total,
        mid_slope,
        mid_jump,
        spread_slope,
        spread_jump,
        negative_increment: negative,
    })
}

/// Literal time-integral reading of the running cost: the slope terms
/// integrated against `ds` instead of against the strategy's squared
/// increments, `1/2 int (gamma + delta) ds + 1/2 int (gamma - delta) y ds`
/// with each cell's sign `y` taken from the holding increment over that
/// cell (left-endpoint slopes). Kept alongside the squared-increment
/// reading so the two can be compared on the same strategy; only the
/// squared-increment reading reproduces executed cash flows.
pub fn time_literal_cost(
    market: &MarketPath,
    strategy: &StrategyPath,
) -> Result<Vec<f64>, ContinuousError> {
    if market.grid.times() != strategy.grid.times() {
        return Err(ContinuousError::GridMismatch);
    }
    let times = strategy.grid.times();
    let mut out = Vec::with_capacity(times.len());
    out.push(0.0);
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        let y = sgn(strategy.holdings[i] - strategy.holdings[i - 1]);
        let g = market.gamma[i - 1];
        let d = market.delta[i - 1];
        let increment = 0.5 * (g + d) * dt + 0.5 * (g - d) * y * dt;
        out.push(out[i - 1] + increment);
    }
    Ok(out)
}

/// Per-level terminal value of the continuous-time portfolio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueLevel {
    pub cells: usize,
    pub mesh: f64,
    pub v_terminal: f64,
}

/// Continuous-time portfolio value along a refining sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousValueReport {
    pub grid: Partition,
    /// Finest-grid value path, starting at `initial_value`.
    pub finest: Vec<f64>,
    pub levels: Vec<ValueLevel>,
}

/// Continuous-time value
/// `V_t = V_0 + int Z dM(., 0) + int Z d(y P(., 0)) / 2 - T_t`,
/// discretized with the position held on each cell as the predictable
/// integrand and the cell's cost atom subtracted.
///
/// On the strategy's own grid with a linear curve this reproduces the
/// discrete ledger's values to machine precision; on coarser levels it is
/// the pre-limit approximation whose gap to the ledger closes as the mesh
/// refines.
pub fn continuous_value(
    curve: &SupplyCurve,
    strategy: &StrategyPath,
    seq: &PartitionSequence,
    initial_value: f64,
) -> Result<ContinuousValueReport, ContinuousError> {
    if curve.len() != strategy.grid.len() {
        return Err(ContinuousError::CurveLengthMismatch { curve: curve.len(), grid: strategy.grid.len() });
    }
    // Finest path: exact per-trade accounting on the strategy grid.
    let n = strategy.grid.len();
    let mut finest = Vec::with_capacity(n);
    let mut v = initial_value;
    finest.push(v);
    let mut prev_q0 = eval_quotes(curve, 0, 0.0)?;
    let mut prev_y = sgn(strategy.trade(0));
    for i in 1..n {
        let q0 = eval_quotes(curve, i, 0.0)?;
        let dz = strategy.trade(i);
        let y = sgn(dz);
        let held = strategy.holdings[i - 1];
        v += held * (q0.mid - prev_q0.mid);
        v += 0.5 * held * (y * q0.spread - prev_y * prev_q0.spread);
        v -= cost_atom(curve, i, dz)?.total();
        finest.push(v);
        prev_q0 = q0;
        prev_y = y;
    }
    // Per-level terminal values from the sampled path.
    let mut levels = Vec::with_capacity(seq.levels().len());
    for part in seq.levels() {
        let times = part.times();
        let mut v = initial_value;
        let mut last_idx = index_on(&strategy.grid, times[0])?;
        let mut prev_q0 = eval_quotes(curve, last_idx, 0.0)?;
        let mut prev_y = sgn(strategy.trade(last_idx));
        for &t in &times[1..] {
            let idx = index_on(&strategy.grid, t)?;
            let dz = strategy.holdings[idx] - strategy.holdings[last_idx];
            let y = sgn(dz);
            let held = strategy.holdings[last_idx];
            let q0 = eval_quotes(curve, idx, 0.0)?;
            v += held * (q0.mid - prev_q0.mid);
            v += 0.5 * held * (y * q0.spread - prev_y * prev_q0.spread);
            v -= cost_atom(curve, idx, dz)?.total();
            prev_q0 = q0;
            prev_y = y;
            last_idx = idx;
        }
        levels.push(ValueLevel { cells: part.cells(), mesh: part.mesh(), v_terminal: v });
    }
    Ok(ContinuousValueReport { grid: strategy.grid.clone(), finest, levels })
}

/// One member of a strategy-sequence convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    /// Member index (1-based position in the sequence).
    pub n: usize,
    /// Terminal cost of member `n` on the finest grid.
    pub cost: f64,
    /// `|cost - limit_cost|`.
    pub gap: f64,
    /// Finest-grid quadratic variation of member `n`.
    pub qv: f64,
}

/// Report of costs along a sequence of strategies against a limit strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Terminal cost of the limit strategy.
    pub limit_cost: f64,
    /// Finest-grid quadratic variation of the limit strategy.
    pub limit_qv: f64,
    /// True when the last member's gap is at most the first member's.
    pub trend_decreasing: bool,
    /// Largest member quadratic variation seen.
    pub qv_sup: f64,
    /// Numerical boundedness guard: set when some member's quadratic
    /// variation exceeds `16 * (limit_qv + 1)`, indicating the sequence's
    /// activity is not uniformly bounded.
    pub qv_divergent: bool,
}

/// Terminal costs of a strategy sequence versus a limit strategy, with a
/// trend statistic and a quadratic-variation boundedness guard.
///
/// Members must share the limit strategy's grid. Note the cost functional
/// is not continuous in the pointwise limit: a smoothed jump has vanishing
/// cost while the jump itself does not, and this report makes that gap
/// visible rather than hiding it.
pub fn cost_convergence_suite(
    members: &[StrategyPath],
    limit: &StrategyPath,
    curve: &SupplyCurve,
) -> Result<ConvergenceReport, ContinuousError> {
    if members.is_empty() {
        return Err(ContinuousError::EmptySequence);
    }
    for m in members {
        if m.grid.times() != limit.grid.times() {
            return Err(ContinuousError::TimeNotOnGrid { t: f64::NAN });
        }
    }
    let limit_cost = cost_process_on_grid(curve, limit)?.terminal();
    let limit_qv = grid_qv(limit);
    let qv_bound = 16.0 * (limit_qv + 1.0);
    let mut rows = Vec::with_capacity(members.len());
    let mut qv_sup = 0.0_f64;
    let mut qv_divergent = false;
    for (k, member) in members.iter().enumerate() {
        let cost = cost_process_on_grid(curve, member)?.terminal();
        let qv = grid_qv(member);
        qv_sup = qv_sup.max(qv);
        if qv > qv_bound {
            qv_divergent = true;
        }
        rows.push(ConvergenceRow { n: k + 1, cost, gap: (cost - limit_cost).abs(), qv });
    }
    let trend_decreasing = rows[rows.len() - 1].gap <= rows[0].gap;
    Ok(ConvergenceReport { rows, limit_cost, limit_qv, trend_decreasing, qv_sup, qv_divergent })
}

/// Sum of squared trades on the strategy's own grid (trades after time 0).
fn grid_qv(strategy: &StrategyPath) -> f64 {
    let mut acc = 0.0;
    for i in 1..strategy.grid.len() {
        let dz = strategy.trade(i);
        acc += dz * dz;
    }
    acc
}
