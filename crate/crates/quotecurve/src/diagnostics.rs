//! Statistical checks of the economy: no free lunch from round trips.
//!
//! Two Monte Carlo diagnostics run over simulated martingale mid paths
//! and randomly generated trading strategies:
//!
//! * [`supermartingale_test`]: with upward-sloping curves every
//!   admissible strategy's marked value should drift down or sideways,
//!   never reliably up. The test estimates `E[V_T - V_0]` and passes when
//!   the estimate is at most three standard errors above zero.
//! * [`arbitrage_probe`]: searches candidate strategies started from an
//!   empty book and zero cash for one whose terminal value is
//!   non-negative on every sampled path and positive in mean beyond three
//!   standard errors. Under valid curves nothing should be flagged;
//!   handing the probe a downward-sloping curve produces a flag, which is
//!   the point of keeping it.
//!
//! Both diagnostics derive market path `p` from RNG stream
//! `MARKET_STREAM + p` and candidate `c` from `STRATEGY_STREAM + c`, so
//! reports are reproducible for a fixed `(seed, grid, parameters)` tuple
//! regardless of evaluation order.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::hedging::{mollify_strategy, HedgeError};
use crate::market::{
    simulate_mid_gbm, GbmParams, MarketError, MarketPath, SlopeRamp, SupplyCurve,
};
use crate::math;
use crate::partition::Partition;
use crate::portfolio::{
    admissibility_check, run_ledger, PortfolioError, StrategyPath, TerminalRule,
};
use crate::rng::{stream_rng, MARKET_STREAM, STRATEGY_STREAM};

/// Errors from the diagnostic suites.
#[derive(Debug, Clone, PartialEq)]
pub enum DiagnosticsError {
    /// The expectation arguments need a driftless mid.
    NonZeroMidDrift(f64),
    /// Every sampled path violated the admissibility floor; the test has
    /// no sample to average.
    AllInadmissible,
    /// Arbitrage candidates must start from an empty book.
    NonzeroInitialHolding { candidate: usize },
    /// Grid too short for the requested strategy family.
    GridTooSmall { len: usize },
    BadParams(&'static str),
    Portfolio(PortfolioError),
    Market(MarketError),
    Hedge(HedgeError),
}

impl fmt::Display for DiagnosticsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonZeroMidDrift(mu) => {
                write!(f, "diagnostic needs a driftless mid, got mu = {mu}")
            }
            Self::AllInadmissible => write!(f, "every sampled path was inadmissible"),
            Self::NonzeroInitialHolding { candidate } => {
                write!(f, "candidate {candidate} does not start from an empty book")
            }
            Self::GridTooSmall { len } => {
                write!(f, "grid with {len} points is too short for this strategy family")
            }
            Self::BadParams(msg) => write!(f, "bad parameters: {msg}"),
            Self::Portfolio(e) => write!(f, "portfolio error: {e}"),
            Self::Market(e) => write!(f, "market error: {e}"),
            Self::Hedge(e) => write!(f, "hedge error: {e}"),
        }
    }
}

impl core::error::Error for DiagnosticsError {}

impl From<PortfolioError> for DiagnosticsError {
    fn from(e: PortfolioError) -> Self {
        Self::Portfolio(e)
    }
}

impl From<MarketError> for DiagnosticsError {
    fn from(e: MarketError) -> Self {
        Self::Market(e)
    }
}

impl From<HedgeError> for DiagnosticsError {
    fn from(e: HedgeError) -> Self {
        Self::Hedge(e)
    }
}

/// Random strategy families used by the diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategyFamily {
    /// `trades` trades at uniform random interior grid times, sizes
    /// uniform on `[-max_size, max_size]`; flat in between.
    PiecewiseConstantRandom { trades: usize, max_size: f64 },
    /// Holdings follow `scale` times a Brownian path sampled on the grid.
    BrownianSampled { scale: f64 },
    /// Brownian holdings smoothed by a trailing window `1/n`
    /// (see [`mollify_strategy`]); a C^0 path with small increments.
    Mollified { scale: f64, n: usize },
    /// Deterministic: jump from 0 to `size` at the interior grid time
    /// nearest `time_fraction` of the horizon, then hold through the
    /// horizon. Ignores the terminal rule (a liquidation would add a
    /// second jump, and the family exists to study exactly one).
    SingleJump { size: f64, time_fraction: f64 },
    /// Deterministic: buy `size` at the first grid time after 0, hold.
    BuyAndHold { size: f64 },
}

/// Reproducible strategy source: candidate `index` is a pure function of
/// `(family, terminal, seed, grid, index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyGenerator {
    pub family: StrategyFamily,
    pub terminal: TerminalRule,
    pub seed: u64,
}

impl StrategyGenerator {
    pub fn generate(&self, grid: &Partition, index: u64) -> Result<StrategyPath, DiagnosticsError> {
        let len = grid.len();
        let mut rng = stream_rng(self.seed, STRATEGY_STREAM + index);
        match self.family {
            StrategyFamily::PiecewiseConstantRandom { trades, max_size } => {
                if len < 3 {
                    return Err(DiagnosticsError::GridTooSmall { len });
                }
                if !(max_size.is_finite() && max_size >= 0.0) {
                    return Err(DiagnosticsError::BadParams("max_size must be non-negative"));
                }
                let mut deltas = vec![0.0; len];
                for _ in 0..trades {
                    // Interior times only; the terminal entry is the rule's.
                    let idx = rng.random_range(1..len - 1);
                    deltas[idx] += (2.0 * rng.random::<f64>() - 1.0) * max_size;
                }
                let mut holdings = Vec::with_capacity(len);
                let mut acc = 0.0;
                for d in &deltas {
                    acc += d;
                    holdings.push(acc);
                }
                Ok(StrategyPath::with_terminal(grid.clone(), holdings, self.terminal)?)
            }
            StrategyFamily::BrownianSampled { scale } => {
                let holdings = brownian_holdings(grid, scale, &mut rng)?;
                Ok(StrategyPath::with_terminal(grid.clone(), holdings, self.terminal)?)
            }
            StrategyFamily::Mollified { scale, n } => {
                let holdings = brownian_holdings(grid, scale, &mut rng)?;
                let raw = StrategyPath::new(grid.clone(), holdings)?;
                let smooth = mollify_strategy(&raw, n)?;
                Ok(StrategyPath::with_terminal(grid.clone(), smooth.holdings, self.terminal)?)
            }
            StrategyFamily::SingleJump { size, time_fraction } => {
                if len < 3 {
                    return Err(DiagnosticsError::GridTooSmall { len });
                }
                if !size.is_finite() {
                    return Err(DiagnosticsError::BadParams("jump size must be finite"));
                }
                if !(0.0..=1.0).contains(&time_fraction) {
                    return Err(DiagnosticsError::BadParams("time_fraction must be in [0, 1]"));
                }
                let last = len - 1;
                let idx = ((time_fraction * last as f64) as usize).clamp(1, last - 1);
                let mut holdings = vec![0.0; len];
                for h in holdings.iter_mut().skip(idx) {
                    *h = size;
                }
                Ok(StrategyPath::new(grid.clone(), holdings)?)
            }
            StrategyFamily::BuyAndHold { size } => {
                if !size.is_finite() {
                    return Err(DiagnosticsError::BadParams("size must be finite"));
                }
                let mut holdings = vec![size; len];
                holdings[0] = 0.0;
                Ok(StrategyPath::with_terminal(grid.clone(), holdings, self.terminal)?)
            }
        }
    }
}

fn brownian_holdings(
    grid: &Partition,
    scale: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>, DiagnosticsError> {
    if !scale.is_finite() {
        return Err(DiagnosticsError::BadParams("scale must be finite"));
    }
    let times = grid.times();
    let mut holdings = Vec::with_capacity(times.len());
    let mut w = 0.0;
    holdings.push(0.0);
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        let z: f64 = rng.sample(StandardNormal);
        w += math::sqrt(dt) * z;
        holdings.push(scale * w);
    }
    Ok(holdings)
}

/// Result of the drift test on marked portfolio values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupermartingaleReport {
    pub n_paths: usize,
    /// Paths that stayed above the admissibility floor and entered the
    /// average.
    pub n_used: usize,
    pub n_inadmissible: usize,
    pub mean_v0: f64,
    pub mean_v_terminal: f64,
    /// Estimate of `E[V_T - V_0]`.
    pub mean_excess: f64,
    pub std_err: f64,
    /// `3 * std_err`.
    pub threshold: f64,
    /// True when `mean_excess <= threshold`.
    pub pass: bool,
}

/// Estimates `E[V_T - V_0]` for one strategy family over driftless GBM
/// mid paths and checks it is not significantly positive.
///
/// Market path `p` and strategy `p` pair up one to one; inadmissible
/// paths (value below `-alpha` at some grid time) are excluded from the
/// average, mirroring the admissibility condition under which the
/// expectation bound holds.
#[allow(clippy::too_many_arguments)]
pub fn supermartingale_test(
    gbm: GbmParams,
    gamma: f64,
    delta_slope: f64,
    generator: &StrategyGenerator,
    grid: &Partition,
    n_paths: usize,
    initial_cash: f64,
    alpha: f64,
    seed: u64,
) -> Result<SupermartingaleReport, DiagnosticsError> {
    if gbm.mu != 0.0 {
        return Err(DiagnosticsError::NonZeroMidDrift(gbm.mu));
    }
    if n_paths == 0 {
        return Err(DiagnosticsError::BadParams("need at least one path"));
    }
    let mut n_used = 0usize;
    let mut n_inadmissible = 0usize;
    let mut sum_v0 = 0.0;
    let mut sum_vt = 0.0;
    let mut sum_x = 0.0;
    let mut sum_x2 = 0.0;
    for p in 0..n_paths {
        let market = simulate_mid_gbm(
            gbm,
            grid,
            seed,
            MARKET_STREAM + p as u64,
            SlopeRamp::constant(gamma),
            SlopeRamp::constant(delta_slope),
        )?;
        let curve = SupplyCurve::linear_from_market(&market);
        let strategy = generator.generate(grid, p as u64)?;
        let ledger = run_ledger(&curve, &market, &strategy, initial_cash)?;
        if !admissibility_check(&ledger, alpha).admissible {
            n_inadmissible += 1;
            continue;
        }
        let x = ledger.terminal_value() - ledger.initial_value();
        n_used += 1;
        sum_v0 += ledger.initial_value();
        sum_vt += ledger.terminal_value();
        sum_x += x;
        sum_x2 += x * x;
    }
    if n_used == 0 {
        return Err(DiagnosticsError::AllInadmissible);
    }
    let nf = n_used as f64;
    let mean_excess = sum_x / nf;
    let var = if n_used > 1 {
        ((sum_x2 - nf * mean_excess * mean_excess) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    let std_err = math::sqrt(var / nf);
    let threshold = 3.0 * std_err;
    Ok(SupermartingaleReport {
        n_paths,
        n_used,
        n_inadmissible,
        mean_v0: sum_v0 / nf,
        mean_v_terminal: sum_vt / nf,
        mean_excess,
        std_err,
        threshold,
        pass: mean_excess <= threshold,
    })
}

/// One candidate's outcome in the arbitrage search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArbitrageCandidate {
    pub candidate: usize,
    /// Smallest terminal value over the admissible paths.
    pub min_terminal: f64,
    pub mean_terminal: f64,
    pub std_err: f64,
    pub n_admissible: usize,
    /// True when every path was admissible, no terminal value was
    /// negative, and the mean exceeds three standard errors.
    pub flagged: bool,
}

/// Result of the arbitrage search.
#[derive(Debug, Clone, PartialEq)]
pub struct ArbitrageReport {
    pub rows: Vec<ArbitrageCandidate>,
    pub n_candidates: usize,
    pub n_paths: usize,
    /// Number of flagged candidates; 0 for an economy with upward-sloping
    /// curves.
    pub flagged: usize,
}

impl ArbitrageReport {
    pub fn any_flagged(&self) -> bool {
        self.flagged > 0
    }
}

/// Searches generated candidates for a statistical free lunch: zero
/// initial cash and empty initial book, terminal value never negative on
/// the sampled paths, mean above three standard errors.
///
/// All candidates are priced on one shared set of market paths so their
/// statistics are comparable (and the paths are simulated once).
#[allow(clippy::too_many_arguments)]
pub fn arbitrage_probe(
    gbm: GbmParams,
    gamma: f64,
    delta_slope: f64,
    generator: &StrategyGenerator,
    grid: &Partition,
    n_candidates: usize,
    n_paths: usize,
    alpha: f64,
    seed: u64,
) -> Result<ArbitrageReport, DiagnosticsError> {
    if gbm.mu != 0.0 {
        return Err(DiagnosticsError::NonZeroMidDrift(gbm.mu));
    }
    if n_candidates == 0 || n_paths == 0 {
        return Err(DiagnosticsError::BadParams("need at least one candidate and one path"));
    }
    let mut markets: Vec<(MarketPath, SupplyCurve)> = Vec::with_capacity(n_paths);
    for p in 0..n_paths {
        let market = simulate_mid_gbm(
            gbm,
            grid,
            seed,
            MARKET_STREAM + p as u64,
            SlopeRamp::constant(gamma),
            SlopeRamp::constant(delta_slope),
        )?;
        let curve = SupplyCurve::linear_from_market(&market);
        markets.push((market, curve));
    }
    let mut rows = Vec::with_capacity(n_candidates);
    let mut flagged = 0usize;
    for c in 0..n_candidates {
        let strategy = generator.generate(grid, c as u64)?;
        if strategy.initial_holding() != 0.0 {
            return Err(DiagnosticsError::NonzeroInitialHolding { candidate: c });
        }
        let mut n_admissible = 0usize;
        let mut min_terminal = f64::INFINITY;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for (market, curve) in &markets {
            let ledger = run_ledger(curve, market, &strategy, 0.0)?;
            if !admissibility_check(&ledger, alpha).admissible {
                continue;
            }
            let v = ledger.terminal_value();
            n_admissible += 1;
            min_terminal = min_terminal.min(v);
            sum += v;
            sum2 += v * v;
        }
        let (mean, std_err) = if n_admissible > 0 {
            let nf = n_admissible as f64;
            let mean = sum / nf;
            let var = if n_admissible > 1 {
                ((sum2 - nf * mean * mean) / (nf - 1.0)).max(0.0)
            } else {
                0.0
            };
            (mean, math::sqrt(var / nf))
        } else {
            (f64::NAN, f64::NAN)
        };
        let is_flagged =
            n_admissible == n_paths && min_terminal >= 0.0 && mean > 3.0 * std_err && mean > 0.0;
        if is_flagged {
            flagged += 1;
        }
        rows.push(ArbitrageCandidate {
            candidate: c,
            min_terminal,
            mean_terminal: mean,
            std_err,
            n_admissible,
            flagged: is_flagged,
        });
    }
    Ok(ArbitrageReport { rows, n_candidates, n_paths, flagged })
}
