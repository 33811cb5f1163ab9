//! Delta hedging of a European call on a grid, with friction.
//!
//! The hedger writes a call, receives the frictionless premium as initial
//! cash and rebalances to the model delta at every grid time, paying the
//! quoted curve prices. With zero rate the premium and delta are
//!
//! ```text
//! C(m, tau) = m N(d1) - K N(d2)
//! d1 = [ln(m / K) + sigma^2 tau / 2] / (sigma sqrt(tau))
//! d2 = d1 - sigma sqrt(tau)
//! delta = N(d1)
//! ```
//!
//! The final grid time only marks the book (no closing trade): the writer
//! keeps the terminal hedge position against delivery. The option settles
//! in cash against the marginal bid at the horizon, the price at which the
//! holder's notional shares could actually be turned into cash.
//!
//! [`mollify_strategy`] replaces a holdings path with its trailing moving
//! average over a window `1/n`, the discrete version of smoothing by a
//! one-sided kernel. The smoothed path starts at zero (the prehistory is
//! an empty book), has increments bounded by the window's total movement,
//! and converges back to the raw path as `n` grows.

use alloc::vec::Vec;
use core::fmt;

use crate::continuous::{cost_process_on_grid, time_literal_cost, ContinuousError};
use crate::market::{
    eval_quotes, simulate_mid_gbm, GbmParams, MarketError, SlopeRamp, SupplyCurve,
};
use crate::math;
use crate::partition::Partition;
use crate::portfolio::{
    decompose_costs, run_ledger, PortfolioError, StrategyPath, TerminalRule,
};
use crate::rng::MARKET_STREAM;

/// Errors from hedging runs and mollification.
#[derive(Debug, Clone, PartialEq)]
pub enum HedgeError {
    BadParams(&'static str),
    /// Averaging window `1/n` is shorter than the grid mesh: the grid
    /// cannot resolve it and the "smoothed" path would just alias the
    /// raw one.
    WindowTooNarrow { window: f64, mesh: f64 },
    /// Averaging window `1/n` exceeds the horizon.
    WindowTooWide { window: f64, horizon: f64 },
    /// Option maturity differs from the grid horizon; the experiment
    /// hedges to the last grid time.
    MaturityMismatch { maturity: f64, horizon: f64 },
    Portfolio(PortfolioError),
    Market(MarketError),
    Continuous(ContinuousError),
}

impl fmt::Display for HedgeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadParams(msg) => write!(f, "bad parameters: {msg}"),
            Self::WindowTooNarrow { window, mesh } => {
                write!(f, "averaging window {window} is below the grid mesh {mesh}")
            }
            Self::WindowTooWide { window, horizon } => {
                write!(f, "averaging window {window} exceeds the horizon {horizon}")
            }
            Self::MaturityMismatch { maturity, horizon } => {
                write!(f, "option maturity {maturity} differs from grid horizon {horizon}")
            }
            Self::Portfolio(e) => write!(f, "portfolio error: {e}"),
            Self::Market(e) => write!(f, "market error: {e}"),
            Self::Continuous(e) => write!(f, "cost process error: {e}"),
        }
    }
}

impl core::error::Error for HedgeError {}

impl From<PortfolioError> for HedgeError {
    fn from(e: PortfolioError) -> Self {
        Self::Portfolio(e)
    }
}

impl From<MarketError> for HedgeError {
    fn from(e: MarketError) -> Self {
        Self::Market(e)
    }
}

impl From<ContinuousError> for HedgeError {
    fn from(e: ContinuousError) -> Self {
        Self::Continuous(e)
    }
}

/// European call to be hedged. Maturity must equal the grid horizon of
/// the hedging experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallSpec {
    pub strike: f64,
    /// Maturity in the grid's time unit.
    pub maturity: f64,
    /// Pricing volatility, per square root of the time unit.
    pub sigma: f64,
}

impl CallSpec {
    pub fn new(strike: f64, maturity: f64, sigma: f64) -> Result<Self, HedgeError> {
        if !(strike.is_finite() && strike > 0.0) {
            return Err(HedgeError::BadParams("strike must be strictly positive"));
        }
        if !(maturity.is_finite() && maturity > 0.0) {
            return Err(HedgeError::BadParams("maturity must be strictly positive"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(HedgeError::BadParams("sigma must be strictly positive"));
        }
        Ok(Self { strike, maturity, sigma })
    }
}

/// Standard normal CDF via the complementary error function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * math::erfc(-x / core::f64::consts::SQRT_2)
}

/// Zero-rate call price. At `tau = 0` (or `sigma = 0`) this is the
/// intrinsic value.
pub fn bs_call_price(mid: f64, strike: f64, sigma: f64, tau: f64) -> f64 {
    debug_assert!(mid > 0.0 && strike > 0.0 && sigma >= 0.0 && tau >= 0.0);
    let vol = sigma * math::sqrt(tau);
    if vol == 0.0 {
        return (mid - strike).max(0.0);
    }
    let d1 = (math::ln(mid / strike) + 0.5 * vol * vol) / vol;
    let d2 = d1 - vol;
    mid * norm_cdf(d1) - strike * norm_cdf(d2)
}

/// Zero-rate call delta `N(d1)`. At `tau = 0` (or `sigma = 0`) the delta
/// degenerates to the exercise indicator, with 1/2 at the kink.
pub fn bs_call_delta(mid: f64, strike: f64, sigma: f64, tau: f64) -> f64 {
    debug_assert!(mid > 0.0 && strike > 0.0 && sigma >= 0.0 && tau >= 0.0);
    let vol = sigma * math::sqrt(tau);
    if vol == 0.0 {
        return if mid > strike {
            1.0
        } else if mid < strike {
            0.0
        } else {
            0.5
        };
    }
    let d1 = (math::ln(mid / strike) + 0.5 * vol * vol) / vol;
    norm_cdf(d1)
}

/// Call payoff against a settlement price.
pub fn payoff_call(settlement: f64, strike: f64) -> f64 {
    (settlement - strike).max(0.0)
}

/// Trailing moving average of a holdings path over a window `1/n`:
/// `out[i] = n * integral of L over [t_i - 1/n, t_i]`, where `L` is the
/// piecewise-linear interpolant of the holdings nodes and zero before
/// time 0 (empty prehistory, so `out[0] = 0`).
///
/// The integral is evaluated exactly from trapezoid prefix sums, so the
/// result is deterministic and free of quadrature error. Requires
/// `mesh <= 1/n <= horizon`: narrower windows alias the raw path, wider
/// ones reach past the start for their whole length.
pub fn mollify_strategy(strategy: &StrategyPath, n: usize) -> Result<StrategyPath, HedgeError> {
    if n == 0 {
        return Err(HedgeError::BadParams("mollification level must be at least 1"));
    }
    let window = 1.0 / (n as f64);
    let grid = &strategy.grid;
    if window < grid.mesh() {
        return Err(HedgeError::WindowTooNarrow { window, mesh: grid.mesh() });
    }
    if window > grid.horizon() {
        return Err(HedgeError::WindowTooWide { window, horizon: grid.horizon() });
    }
    let times = grid.times();
    let h = &strategy.holdings;
    let len = times.len();
    // prefix[j] = integral of L over [0, t_j].
    let mut prefix = Vec::with_capacity(len);
    prefix.push(0.0);
    for j in 1..len {
        let dt = times[j] - times[j - 1];
        prefix.push(prefix[j - 1] + 0.5 * (h[j - 1] + h[j]) * dt);
    }
    // Integral of L over [0, a] for arbitrary a in [0, horizon].
    let integral_to = |a: f64| -> f64 {
        if a <= 0.0 {
            return 0.0;
        }
        match times.binary_search_by(|x| x.total_cmp(&a)) {
            Ok(j) => prefix[j],
            Err(ins) => {
                let j = ins - 1;
                let dt = times[j + 1] - times[j];
                let s = (h[j + 1] - h[j]) / dt;
                let u = a - times[j];
                prefix[j] + h[j] * u + 0.5 * s * u * u
            }
        }
    };
    let mut out = Vec::with_capacity(len);
    for j in 0..len {
        out.push((n as f64) * (prefix[j] - integral_to(times[j] - window)));
    }
    StrategyPath::new(grid.clone(), out).map_err(HedgeError::Portfolio)
}

/// Outcome of hedging one simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgePathResult {
    pub path_index: usize,
    /// Portfolio value at the horizon, before settling the option.
    pub terminal_value: f64,
    /// Option payoff settled against the marginal bid at the horizon.
    pub payoff: f64,
    /// Realized friction: the ledger decomposition's `total_cost`.
    pub total_cost: f64,
    /// Slope-based cost forecast: the cost-process terminal computed from
    /// the strategy's increments and the quoted slopes, not from executed
    /// cash flows.
    pub prediction: f64,
    /// Alternative forecast with the slopes integrated against time
    /// instead of squared increments. Reported for comparison only; it
    /// does not track executed costs.
    pub time_literal: f64,
}

impl HedgePathResult {
    /// Hedging error: portfolio value minus what the writer owes.
    pub fn error(&self) -> f64 {
        self.terminal_value - self.payoff
    }
}

/// Hedging experiment setup, shared by all paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeSetup {
    pub call: CallSpec,
    pub gbm: GbmParams,
    /// Ask slope per share.
    pub gamma: f64,
    /// Bid slope per share.
    pub delta_slope: f64,
    /// 0 disables smoothing; otherwise the delta path is replaced by its
    /// trailing average over `1/mollify_n`.
    pub mollify_n: usize,
}

/// Hedges one simulated path end to end and reports the outcome.
///
/// The mid path uses the stream `MARKET_STREAM + path_index` of `seed`,
/// so results are a pure function of `(setup, grid, seed, path_index)`
/// and can be computed in any order or in parallel.
pub fn hedge_single_path(
    setup: &HedgeSetup,
    grid: &Partition,
    seed: u64,
    path_index: usize,
) -> Result<HedgePathResult, HedgeError> {
    let horizon = grid.horizon();
    if (setup.call.maturity - horizon).abs() > 1e-12 * horizon.max(1.0) {
        return Err(HedgeError::MaturityMismatch { maturity: setup.call.maturity, horizon });
    }
    let market = simulate_mid_gbm(
        setup.gbm,
        grid,
        seed,
        MARKET_STREAM + path_index as u64,
        SlopeRamp::constant(setup.gamma),
        SlopeRamp::constant(setup.delta_slope),
    )?;
    let curve = SupplyCurve::linear_from_market(&market);
    let times = grid.times();
    let mut holdings = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let tau = (setup.call.maturity - t).max(0.0);
        holdings.push(bs_call_delta(market.mid[i], setup.call.strike, setup.call.sigma, tau));
    }
    // The horizon entry only marks: the terminal delta is an indicator and
    // rebalancing into it at the last instant is pure friction.
    let mut strategy = StrategyPath::with_terminal(grid.clone(), holdings, TerminalRule::MarkOnly)?;
    if setup.mollify_n > 0 {
        strategy = mollify_strategy(&strategy, setup.mollify_n)?;
    }
    let premium =
        bs_call_price(setup.gbm.initial_mid, setup.call.strike, setup.call.sigma, setup.call.maturity);
    let ledger = run_ledger(&curve, &market, &strategy, premium)?;
    let decomposition = decompose_costs(&ledger, &curve, &market)?;
    let settlement = eval_quotes(&curve, times.len() - 1, 0.0)?.bid;
    let literal = time_literal_cost(&market, &strategy)?;
    Ok(HedgePathResult {
        path_index,
        terminal_value: ledger.terminal_value(),
        payoff: payoff_call(settlement, setup.call.strike),
        total_cost: decomposition.total_cost,
        prediction: cost_process_on_grid(&curve, &strategy)?.terminal(),
        time_literal: *literal.last().unwrap_or(&0.0),
    })
}

/// Aggregate statistics over the paths of one hedging experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeReport {
    pub n_paths: usize,
    /// Cells of the rebalancing grid.
    pub rebalance_cells: usize,
    pub mollify_n: usize,
    /// Starting value: premium net of the initial acquisition's friction.
    /// Identical across paths (same initial mid, same initial delta).
    pub v0: f64,
    pub mean_terminal_value: f64,
    pub mean_payoff: f64,
    pub mean_total_cost: f64,
    /// Mean of the slope-based forecast.
    pub cost_integral_prediction: f64,
    /// Mean of `total_cost - prediction` with its standard error: how far
    /// the executed friction sits from the slope forecast. Zero to
    /// rounding for linear curves, where the two routes coincide.
    pub mean_cost_gap: f64,
    pub cost_gap_std_err: f64,
    /// Root mean squared hedging error `sqrt(E[(V_T - payoff)^2])`.
    pub l2_error: f64,
    /// Delta-method standard error of `l2_error`.
    pub l2_std_err: f64,
    /// Mean of the time-integrated forecast, for comparison with the
    /// slope-based one.
    pub mean_time_literal: f64,
}

/// Reduces per-path results (in path order) to the experiment report.
pub fn aggregate_hedge(
    results: &[HedgePathResult],
    rebalance_cells: usize,
    mollify_n: usize,
    v0: f64,
) -> Result<HedgeReport, HedgeError> {
    let n = results.len();
    if n == 0 {
        return Err(HedgeError::BadParams("no paths to aggregate"));
    }
    let nf = n as f64;
    let mut sum_v = 0.0;
    let mut sum_pay = 0.0;
    let mut sum_cost = 0.0;
    let mut sum_pred = 0.0;
    let mut sum_e2 = 0.0;
    let mut sum_e4 = 0.0;
    let mut sum_gap = 0.0;
    let mut sum_gap2 = 0.0;
    let mut sum_literal = 0.0;
    for r in results {
        sum_v += r.terminal_value;
        sum_pay += r.payoff;
        sum_cost += r.total_cost;
        sum_pred += r.prediction;
        sum_literal += r.time_literal;
        let e2 = r.error() * r.error();
        sum_e2 += e2;
        sum_e4 += e2 * e2;
        let gap = r.total_cost - r.prediction;
        sum_gap += gap;
        sum_gap2 += gap * gap;
    }
    let mean_e2 = sum_e2 / nf;
    let var_e2 = (sum_e4 / nf - mean_e2 * mean_e2).max(0.0);
    let l2_error = math::sqrt(mean_e2);
    // SE of sqrt(mean) by the delta method; degenerate at 0.
    let l2_std_err = if l2_error > 0.0 && n > 1 {
        math::sqrt(var_e2 / (nf - 1.0)) / (2.0 * l2_error)
    } else {
        0.0
    };
    let mean_gap = sum_gap / nf;
    let var_gap = (sum_gap2 / nf - mean_gap * mean_gap).max(0.0);
    let gap_se = if n > 1 { math::sqrt(var_gap / (nf - 1.0)) } else { 0.0 };
    Ok(HedgeReport {
        n_paths: n,
        rebalance_cells,
        mollify_n,
        v0,
        mean_terminal_value: sum_v / nf,
        mean_payoff: sum_pay / nf,
        mean_total_cost: sum_cost / nf,
        cost_integral_prediction: sum_pred / nf,
        mean_cost_gap: mean_gap,
        cost_gap_std_err: gap_se,
        l2_error,
        l2_std_err,
        mean_time_literal: sum_literal / nf,
    })
}

/// Starting value of the hedge: the premium less the friction of buying
/// the initial delta. Path independent, computed once. For the linear
/// family `P(0, 0) = 0`, so the mark after the purchase is the plain mid
/// and `V_0 = premium - gamma * d0^2`.
pub fn hedge_initial_value(setup: &HedgeSetup) -> f64 {
    let m0 = setup.gbm.initial_mid;
    let premium = bs_call_price(m0, setup.call.strike, setup.call.sigma, setup.call.maturity);
    let d0 = if setup.mollify_n > 0 {
        // A trailing average with empty prehistory starts flat at zero.
        0.0
    } else {
        bs_call_delta(m0, setup.call.strike, setup.call.sigma, setup.call.maturity)
    };
    premium - (setup.gamma * d0 + m0) * d0 + d0 * m0
}

/// Runs the whole experiment sequentially: `n_paths` hedged paths plus
/// the aggregate report. Callers wanting parallelism can map
/// [`hedge_single_path`] over indices themselves and reduce in index
/// order with [`aggregate_hedge`]; the per-path results are identical.
pub fn run_hedge_experiment(
    setup: &HedgeSetup,
    grid: &Partition,
    n_paths: usize,
    seed: u64,
) -> Result<(Vec<HedgePathResult>, HedgeReport), HedgeError> {
    if n_paths == 0 {
        return Err(HedgeError::BadParams("need at least one path"));
    }
    let mut results = Vec::with_capacity(n_paths);
    for p in 0..n_paths {
        results.push(hedge_single_path(setup, grid, seed, p)?);
    }
    let report = aggregate_hedge(&results, grid.cells(), setup.mollify_n, hedge_initial_value(setup))?;
    Ok((results, report))
}
