//! The exact discrete self-financing ledger and its cost decomposition.
//!
//! A strategy holds `z1` shares and `z0` units of cash (zero interest).
//! Rebalancing by `dz` shares at grid time `t` is self-financing when the
//! cash leg pays exactly the quoted curve price:
//!
//! ```text
//! dz >= 0:  d(z0) = -A(t, dz) * dz          buy at the volume's ask
//! dz <  0:  d(z0) = -B(t, dz) * dz          sell at the volume's bid
//! ```
//!
//! equivalently `d(z0) = -M(t, dz) dz - P(t, dz) sgn(dz) dz / 2`, with no
//! Taylor truncation. The position is marked against the marginal quotes
//! with the sign of the latest trade: `V = z0 + z1 (M(t, 0) + s P(t, 0) / 2)`
//! where `s = sgn(dz)` of the trade at `t` (so `s = 0` and the mark is the
//! mid whenever the step does not trade).
//!
//! [`decompose_costs`] splits the terminal value exactly, with no
//! remainder beyond float rounding:
//!
//! ```text
//! V_T = V_0 + capital_gain + spread_carry - total_cost
//! total_cost = price_impact + spread_impact
//! price_impact_i  = [M(t_i, dz_i) - M(t_i, 0)] dz_i
//! spread_impact_i = [P(t_i, dz_i) - P(t_i, 0)] |dz_i| / 2
//! ```
//!
//! where sums run over `i = 1..N`; the trade at `t_0 = 0` (building the
//! initial position out of cash) is part of `V_0` itself.

use alloc::vec::Vec;
use core::fmt;

use crate::market::{eval_quotes, MarketError, MarketPath, SupplyCurve};
use crate::partition::Partition;
use crate::sgn;

/// What the holdings path does at the final grid time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalRule {
    /// Close the position with a final trade at the horizon.
    Liquidate,
    /// Keep the last position; the horizon entry only marks to market.
    MarkOnly,
}

/// Errors from ledger construction.
#[derive(Debug, Clone, PartialEq)]
pub enum PortfolioError {
    /// Strategy and market grids differ.
    GridMismatch,
    /// Curve has a different number of grid times than the market grid.
    CurveLengthMismatch { curve: usize, grid: usize },
    /// Holdings array length differs from the grid length, or a value is
    /// not finite.
    BadStrategy(&'static str),
    Market(MarketError),
}

impl fmt::Display for PortfolioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::GridMismatch => write!(f, "strategy grid differs from market grid"),
            Self::CurveLengthMismatch { curve, grid } => {
                write!(f, "curve has {curve} grid times, grid has {grid}")
            }
            Self::BadStrategy(msg) => write!(f, "bad strategy: {msg}"),
            Self::Market(e) => write!(f, "market error: {e}"),
        }
    }
}

impl core::error::Error for PortfolioError {}

impl From<MarketError> for PortfolioError {
    fn from(e: MarketError) -> Self {
        Self::Market(e)
    }
}

/// Stock-holding path sampled on a grid.
///
/// `holdings[i]` is the position held on `(t_i, t_{i+1}]`, decided by the
/// trade at `t_i`; the path is left-continuous in between. `holdings[0]`
/// is the initial position built at `t_0 = 0` out of an empty book, and
/// `holdings[N]` is the post-horizon position left by the trade at the
/// final grid time (equal to `holdings[N-1]` when that trade is skipped).
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyPath {
    pub grid: Partition,
    pub holdings: Vec<f64>,
}

impl StrategyPath {
    pub fn new(grid: Partition, holdings: Vec<f64>) -> Result<Self, PortfolioError> {
        if holdings.len() != grid.len() {
            return Err(PortfolioError::BadStrategy("holdings length differs from grid length"));
        }
        if holdings.iter().any(|h| !h.is_finite()) {
            return Err(PortfolioError::BadStrategy("non-finite holding"));
        }
        Ok(Self { grid, holdings })
    }

    /// Applies a terminal rule to the last entry of a holdings array and
    /// wraps it. The input array gives positions decided at
    /// `t_0 .. t_{N-1}`; the final entry is derived from the rule.
    pub fn with_terminal(
        grid: Partition,
        mut holdings: Vec<f64>,
        rule: TerminalRule,
    ) -> Result<Self, PortfolioError> {
        if holdings.len() != grid.len() {
            return Err(PortfolioError::BadStrategy("holdings length differs from grid length"));
        }
        let n = holdings.len();
        holdings[n - 1] = match rule {
            TerminalRule::Liquidate => 0.0,
            TerminalRule::MarkOnly => holdings[n - 2],
        };
        Self::new(grid, holdings)
    }

    pub fn initial_holding(&self) -> f64 {
        self.holdings[0]
    }

    /// Post-horizon position.
    pub fn terminal_holding(&self) -> f64 {
        self.holdings[self.holdings.len() - 1]
    }

    /// Trade executed at grid index `i` (prehistory is an empty book, so
    /// the trade at index 0 is the whole initial position).
    pub fn trade(&self, i: usize) -> f64 {
        if i == 0 {
            self.holdings[0]
        } else {
            self.holdings[i] - self.holdings[i - 1]
        }
    }

    /// Right-continuous sample `Z(t+)`: the position just after the most
    /// recent trade at or before `t`. Used when sampling the path on
    /// coarser grids, so a trade exactly at a sampled time is attributed
    /// to that time (matching the ledger's accounting).
    pub fn value_right(&self, t: f64) -> f64 {
        let times = self.grid.times();
        let i = match times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => return 0.0,
            Err(ins) => ins - 1,
        };
        self.holdings[i]
    }
}

/// One grid step of the ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub t: f64,
    /// Cash after the trade at `t`.
    pub z0: f64,
    /// Shares after the trade at `t`.
    pub z1: f64,
    /// Shares traded at `t`.
    pub trade: f64,
    /// Cash leg of the trade at `t`.
    pub cash_flow: f64,
    /// Mark-to-market value after the trade.
    pub value: f64,
    /// `sgn(trade)`: -1, 0 or 1; the mark uses this sign.
    pub sign: i8,
}

/// Full ledger of a strategy on one market path.
#[derive(Debug, Clone, PartialEq)]
pub struct Ledger {
    pub entries: Vec<LedgerEntry>,
    pub initial_cash: f64,
    /// True when any executed trade or mark touched a non-positive quote.
    pub nonpositive_quote: bool,
}

impl Ledger {
    pub fn initial_value(&self) -> f64 {
        self.entries[0].value
    }

    pub fn terminal_value(&self) -> f64 {
        self.entries[self.entries.len() - 1].value
    }
}

/// Cash leg of trading `dz` shares at grid time `t_index`: exact curve
/// prices, buys at `A(t, dz)`, sells at `B(t, dz)`, zero for `dz = 0`.
pub fn rebalance_cash(curve: &SupplyCurve, t_index: usize, dz: f64) -> Result<f64, MarketError> {
    if dz == 0.0 {
        // Still range-check the index so the two branches agree on errors.
        eval_quotes(curve, t_index, 0.0)?;
        return Ok(0.0);
    }
    let q = eval_quotes(curve, t_index, dz)?;
    Ok(if dz > 0.0 { -q.ask * dz } else { -q.bid * dz })
}

/// Mark-to-market value `z0 + z1 (M(t, 0) + sign * P(t, 0) / 2)`.
///
/// `sign` is the sign of the latest trade: positions marked after a buy
/// use the marginal ask, after a sale the marginal bid, and the mid when
/// the step did not trade.
pub fn mark_to_market(
    curve: &SupplyCurve,
    t_index: usize,
    z0: f64,
    z1: f64,
    sign: i8,
) -> Result<f64, MarketError> {
    debug_assert!(sign == -1 || sign == 0 || sign == 1);
    let q = eval_quotes(curve, t_index, 0.0)?;
    Ok(z0 + z1 * (q.mid + 0.5 * f64::from(sign) * q.spread))
}

/// Runs the ledger: at every grid time executes the strategy's trade at
/// the exact curve price, then marks the book.
///
/// The entry at `t_0` already contains the initial position's acquisition
/// out of `initial_cash`; its `value` is the portfolio's starting value
/// `V_0` net of that friction.
pub fn run_ledger(
    curve: &SupplyCurve,
    market: &MarketPath,
    strategy: &StrategyPath,
    initial_cash: f64,
) -> Result<Ledger, PortfolioError> {
    if strategy.grid.times() != market.grid.times() {
        return Err(PortfolioError::GridMismatch);
    }
    if curve.len() != market.grid.len() {
        return Err(PortfolioError::CurveLengthMismatch { curve: curve.len(), grid: market.grid.len() });
    }
    let times = market.grid.times();
    let mut entries = Vec::with_capacity(times.len());
    let mut z0 = initial_cash;
    let mut nonpositive = false;
    for (i, &t) in times.iter().enumerate() {
        let dz = strategy.trade(i);
        let cash_flow = rebalance_cash(curve, i, dz)?;
        z0 += cash_flow;
        let z1 = strategy.holdings[i];
        let sign = sgn(dz) as i8;
        let value = mark_to_market(curve, i, z0, z1, sign)?;
        if dz != 0.0 {
            let q = eval_quotes(curve, i, dz)?;
            if q.ask <= 0.0 || q.bid <= 0.0 {
                nonpositive = true;
            }
        }
        let q0 = eval_quotes(curve, i, 0.0)?;
        if q0.ask <= 0.0 || q0.bid <= 0.0 {
            nonpositive = true;
        }
        entries.push(LedgerEntry { t, z0, z1, trade: dz, cash_flow, value, sign });
    }
    Ok(Ledger { entries, initial_cash, nonpositive_quote: nonpositive })
}

/// Exact split of the ledger's value change into gain, carry and cost.
///
/// All sums run over steps `1..N`. `residual` is the float left of the
/// identity `V_T - V_0 - capital_gain - spread_carry + total_cost` and
/// stays at rounding scale for any ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostDecomposition {
    /// `sum z1_{i-1} * (M(t_i, 0) - M(t_{i-1}, 0))`.
    pub capital_gain: f64,
    /// `sum z1_{i-1} * (s_i P(t_i, 0) - s_{i-1} P(t_{i-1}, 0)) / 2`:
    /// value drift from re-marking the held position.
    pub spread_carry: f64,
    /// `sum P(t_i, dz_i) |dz_i| / 2`: execution cost beyond the mid,
    /// including the marginal spread.
    pub implicit_cost: f64,
    /// `sum [M(t_i, dz_i) - M(t_i, 0)] dz_i`.
    pub price_impact: f64,
    /// `sum [P(t_i, dz_i) - P(t_i, 0)] |dz_i| / 2`.
    pub spread_impact: f64,
    /// `price_impact + spread_impact`: the friction subtracted from the
    /// frictionless evolution.
    pub total_cost: f64,
    pub v0: f64,
    pub v_terminal: f64,
    pub residual: f64,
}

/// Decomposes a ledger produced by [`run_ledger`] against the same curve.
pub fn decompose_costs(
    ledger: &Ledger,
    curve: &SupplyCurve,
    market: &MarketPath,
) -> Result<CostDecomposition, PortfolioError> {
    if ledger.entries.len() != market.grid.len() {
        return Err(PortfolioError::GridMismatch);
    }
    if curve.len() != market.grid.len() {
        return Err(PortfolioError::CurveLengthMismatch { curve: curve.len(), grid: market.grid.len() });
    }
    let mut capital_gain = 0.0;
    let mut spread_carry = 0.0;
    let mut implicit_cost = 0.0;
    let mut price_impact = 0.0;
    let mut spread_impact = 0.0;
    let mut prev = eval_quotes(curve, 0, 0.0)?;
    for i in 1..ledger.entries.len() {
        let e = &ledger.entries[i];
        let held = ledger.entries[i - 1].z1;
        let s_prev = f64::from(ledger.entries[i - 1].sign);
        let s = f64::from(e.sign);
        let q0 = eval_quotes(curve, i, 0.0)?;
        capital_gain += held * (q0.mid - prev.mid);
        spread_carry += 0.5 * held * (s * q0.spread - s_prev * prev.spread);
        if e.trade != 0.0 {
            let q = eval_quotes(curve, i, e.trade)?;
            let abs_dz = e.trade.abs();
            implicit_cost += 0.5 * q.spread * abs_dz;
            price_impact += (q.mid - q0.mid) * e.trade;
            spread_impact += 0.5 * (q.spread - q0.spread) * abs_dz;
        }
        prev = q0;
    }
    let total_cost = price_impact + spread_impact;
    let v0 = ledger.initial_value();
    let v_terminal = ledger.terminal_value();
    let residual = v_terminal - v0 - capital_gain - spread_carry + total_cost;
    Ok(CostDecomposition {
        capital_gain,
        spread_carry,
        implicit_cost,
        price_impact,
        spread_impact,
        total_cost,
        v0,
        v_terminal,
        residual,
    })
}

/// Result of the lower-bound (admissibility) scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport {
    /// True when `V_t >= -alpha` at every grid time.
    pub admissible: bool,
    pub min_value: f64,
    pub first_violation_time: Option<f64>,
}

/// Checks `V_t >= -alpha` along the ledger.
pub fn admissibility_check(ledger: &Ledger, alpha: f64) -> AdmissibilityReport {
    debug_assert!(alpha >= 0.0);
    let mut min_value = f64::INFINITY;
    let mut first_violation_time = None;
    for e in &ledger.entries {
        min_value = min_value.min(e.value);
        if e.value < -alpha && first_violation_time.is_none() {
            first_violation_time = Some(e.t);
        }
    }
    AdmissibilityReport { admissible: first_violation_time.is_none(), min_value, first_violation_time }
}
