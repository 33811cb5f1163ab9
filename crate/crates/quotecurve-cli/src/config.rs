//! Experiment configuration: a sectioned TOML document with units spelled
//! out in the key names, strict about unknown keys, validated up front so
//! range mistakes fail before any simulation runs.

use std::fmt;

use serde::Deserialize;

/// Parse or validation failure, with the offending key where known.
#[derive(Debug)]
pub enum ConfigError {
    /// TOML syntax or schema error (unknown key, duplicate key, type
    /// mismatch), with the parser's location context.
    Parse(String),
    /// A value outside its documented range: key, value, range.
    Range { key: &'static str, value: String, range: &'static str },
    /// A section required by the chosen experiment is missing.
    MissingSection { experiment: &'static str, section: &'static str },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Parse(msg) => write!(f, "config parse error: {msg}"),
            Self::Range { key, value, range } => {
                write!(f, "config value out of range: {key} = {value}, expected {range}")
            }
            Self::MissingSection { experiment, section } => {
                write!(f, "experiment \"{experiment}\" needs a [{section}] section")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Dump one simulated market path and its grid.
    Simulate,
    /// One strategy on one path: full ledger plus cost decomposition.
    Ledger,
    /// Cumulative cost process of one strategy on one path.
    CostProcess,
    /// Monte Carlo delta hedging of a call.
    Hedge,
    /// Refinement and smoothing studies: quadratic variation across
    /// dyadic levels, costs of mollified strategies against the raw one.
    Convergence,
    /// Statistical no-free-lunch suite.
    Diagnostics,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Ledger => "ledger",
            Self::CostProcess => "cost_process",
            Self::Hedge => "hedge",
            Self::Convergence => "convergence",
            Self::Diagnostics => "diagnostics",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub seed: u64,
    /// Output directory; overridden by --out, falls back to
    /// QUOTECURVE_OUT and then the working directory.
    #[serde(default)]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub initial_mid: f64,
    /// Mid drift per year; diagnostics experiments require 0.
    #[serde(default)]
    pub mu_per_year: f64,
    pub sigma_per_sqrt_year: f64,
    /// Ask slope per share; with `gamma_end_per_share` the slope ramps
    /// linearly over the horizon.
    pub gamma_per_share: f64,
    #[serde(default)]
    pub gamma_end_per_share: Option<f64>,
    /// Bid slope per share, same ramp convention.
    pub delta_per_share: f64,
    #[serde(default)]
    pub delta_end_per_share: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    #[default]
    Uniform,
    /// Uniformly drawn interior points; cells is the mean count.
    Random,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub horizon_years: f64,
    /// Trading grid cells.
    #[serde(default = "default_cells")]
    pub cells: usize,
    /// Dyadic levels for convergence studies (finest level = `cells`).
    #[serde(default = "default_levels")]
    pub refinement_levels: usize,
    #[serde(default)]
    pub kind: GridKind,
}

fn default_cells() -> usize {
    1024
}

fn default_levels() -> usize {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    PiecewiseConstant,
    Brownian,
    Mollified,
    SingleJump,
    BuyAndHold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalKind {
    #[default]
    Liquidate,
    MarkOnly,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    pub family: FamilyKind,
    /// piecewise_constant: number of interior trades.
    #[serde(default = "default_trades")]
    pub trades: usize,
    /// piecewise_constant: trade sizes are uniform on [-max_size, max_size].
    #[serde(default = "one")]
    pub max_size: f64,
    /// brownian / mollified: holdings scale.
    #[serde(default = "one")]
    pub scale: f64,
    /// mollified: averaging window is 1/mollify_n.
    #[serde(default = "default_strategy_mollify")]
    pub mollify_n: usize,
    /// single_jump: position size after the jump.
    #[serde(default = "two")]
    pub jump_size: f64,
    /// single_jump: jump time as a fraction of the horizon.
    #[serde(default = "half")]
    pub jump_time_fraction: f64,
    /// buy_and_hold: position size.
    #[serde(default = "one")]
    pub size: f64,
    #[serde(default)]
    pub terminal: TerminalKind,
    #[serde(default)]
    pub initial_cash: f64,
}

fn default_trades() -> usize {
    8
}

fn default_strategy_mollify() -> usize {
    8
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HedgeSection {
    pub strike: f64,
    /// Must equal grid.horizon_years; the hedge rebalances to the last
    /// grid time.
    pub maturity_years: f64,
    /// Pricing volatility; defaults to the market's.
    #[serde(default)]
    pub sigma_per_sqrt_year: Option<f64>,
    #[serde(default = "default_hedge_paths")]
    pub n_paths: usize,
    /// 0 hedges the raw delta; n > 0 smooths it over a 1/n window.
    #[serde(default)]
    pub mollify_n: usize,
}

fn default_hedge_paths() -> usize {
    10_000
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(default = "default_candidates")]
    pub n_candidates: usize,
    #[serde(default = "default_diag_paths")]
    pub n_paths: usize,
    /// Admissibility floor: paths with value below -alpha are excluded.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Starting cash for the drift test (the arbitrage probe always
    /// starts from zero).
    #[serde(default = "default_diag_cash")]
    pub initial_cash: f64,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            n_candidates: default_candidates(),
            n_paths: default_diag_paths(),
            alpha: default_alpha(),
            initial_cash: default_diag_cash(),
        }
    }
}

fn default_candidates() -> usize {
    1000
}

fn default_diag_paths() -> usize {
    256
}

fn default_alpha() -> f64 {
    1e6
}

fn default_diag_cash() -> f64 {
    1000.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    /// Smoothing windows 1/n to sweep, ascending.
    #[serde(default = "default_mollify_ns")]
    pub mollify_ns: Vec<usize>,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self { mollify_ns: default_mollify_ns() }
    }
}

fn default_mollify_ns() -> Vec<usize> {
    vec![2, 4, 8, 16]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: ExperimentSection,
    pub market: MarketSection,
    pub grid: GridSection,
    #[serde(default)]
    pub strategy: Option<StrategySection>,
    #[serde(default)]
    pub hedge: Option<HedgeSection>,
    #[serde(default)]
    pub diagnostics: Option<DiagnosticsSection>,
    #[serde(default)]
    pub convergence: Option<ConvergenceSection>,
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let config: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    validate(&config)?;
    Ok(config)
}

fn range_err(key: &'static str, value: impl fmt::Display, range: &'static str) -> ConfigError {
    ConfigError::Range { key, value: value.to_string(), range }
}

fn require_finite_positive(
    key: &'static str,
    value: f64,
    range: &'static str,
) -> Result<(), ConfigError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(range_err(key, value, range));
    }
    Ok(())
}

fn validate(c: &Config) -> Result<(), ConfigError> {
    let m = &c.market;
    require_finite_positive("market.initial_mid", m.initial_mid, "(0, inf)")?;
    if !(m.sigma_per_sqrt_year.is_finite() && m.sigma_per_sqrt_year >= 0.0) {
        return Err(range_err("market.sigma_per_sqrt_year", m.sigma_per_sqrt_year, "[0, inf)"));
    }
    if !m.mu_per_year.is_finite() {
        return Err(range_err("market.mu_per_year", m.mu_per_year, "finite"));
    }
    if !m.gamma_per_share.is_finite() {
        return Err(range_err("market.gamma_per_share", m.gamma_per_share, "finite"));
    }
    if !m.delta_per_share.is_finite() {
        return Err(range_err("market.delta_per_share", m.delta_per_share, "finite"));
    }
    if let Some(g) = m.gamma_end_per_share {
        if !g.is_finite() {
            return Err(range_err("market.gamma_end_per_share", g, "finite"));
        }
    }
    if let Some(d) = m.delta_end_per_share {
        if !d.is_finite() {
            return Err(range_err("market.delta_end_per_share", d, "finite"));
        }
    }

    let g = &c.grid;
    require_finite_positive("grid.horizon_years", g.horizon_years, "(0, inf)")?;
    if g.cells == 0 {
        return Err(range_err("grid.cells", g.cells, ">= 1"));
    }
    if g.refinement_levels == 0 {
        return Err(range_err("grid.refinement_levels", g.refinement_levels, ">= 1"));
    }

    if let Some(s) = &c.strategy {
        if !(s.max_size.is_finite() && s.max_size >= 0.0) {
            return Err(range_err("strategy.max_size", s.max_size, "[0, inf)"));
        }
        if !s.scale.is_finite() {
            return Err(range_err("strategy.scale", s.scale, "finite"));
        }
        if !s.jump_size.is_finite() {
            return Err(range_err("strategy.jump_size", s.jump_size, "finite"));
        }
        if !(0.0..=1.0).contains(&s.jump_time_fraction) {
            return Err(range_err("strategy.jump_time_fraction", s.jump_time_fraction, "[0, 1]"));
        }
        if !s.size.is_finite() {
            return Err(range_err("strategy.size", s.size, "finite"));
        }
        if !s.initial_cash.is_finite() {
            return Err(range_err("strategy.initial_cash", s.initial_cash, "finite"));
        }
        if s.family == FamilyKind::Mollified && s.mollify_n == 0 {
            return Err(range_err("strategy.mollify_n", s.mollify_n, ">= 1"));
        }
    }

    if let Some(h) = &c.hedge {
        require_finite_positive("hedge.strike", h.strike, "(0, inf)")?;
        require_finite_positive("hedge.maturity_years", h.maturity_years, "(0, inf)")?;
        if let Some(sig) = h.sigma_per_sqrt_year {
            require_finite_positive("hedge.sigma_per_sqrt_year", sig, "(0, inf)")?;
        }
        if h.n_paths == 0 {
            return Err(range_err("hedge.n_paths", h.n_paths, ">= 1"));
        }
    }

    if let Some(d) = &c.diagnostics {
        if d.n_candidates == 0 {
            return Err(range_err("diagnostics.n_candidates", d.n_candidates, ">= 1"));
        }
        if d.n_paths == 0 {
            return Err(range_err("diagnostics.n_paths", d.n_paths, ">= 1"));
        }
        if !(d.alpha.is_finite() && d.alpha >= 0.0) {
            return Err(range_err("diagnostics.alpha", d.alpha, "[0, inf)"));
        }
        if !d.initial_cash.is_finite() {
            return Err(range_err("diagnostics.initial_cash", d.initial_cash, "finite"));
        }
    }

    if let Some(cv) = &c.convergence {
        if cv.mollify_ns.is_empty() {
            return Err(range_err("convergence.mollify_ns", "[]", "at least one entry"));
        }
        if cv.mollify_ns.contains(&0) {
            return Err(range_err("convergence.mollify_ns", 0, "entries >= 1"));
        }
        if cv.mollify_ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(range_err("convergence.mollify_ns", "unsorted", "strictly ascending"));
        }
    }

    // Per-experiment requirements, checked here so a bad pairing fails
    // before simulation.
    let kind = c.experiment.kind;
    let needs_strategy = matches!(
        kind,
        ExperimentKind::Ledger
            | ExperimentKind::CostProcess
            | ExperimentKind::Convergence
            | ExperimentKind::Diagnostics
    );
    if needs_strategy && c.strategy.is_none() {
        return Err(ConfigError::MissingSection { experiment: kind.name(), section: "strategy" });
    }
    match kind {
        ExperimentKind::Hedge => {
            let Some(h) = &c.hedge else {
                return Err(ConfigError::MissingSection { experiment: kind.name(), section: "hedge" });
            };
            let horizon = c.grid.horizon_years;
            if (h.maturity_years - horizon).abs() > 1e-12 * horizon.max(1.0) {
                return Err(range_err(
                    "hedge.maturity_years",
                    h.maturity_years,
                    "equal to grid.horizon_years",
                ));
            }
        }
        ExperimentKind::Diagnostics => {
            if c.market.mu_per_year != 0.0 {
                return Err(range_err(
                    "market.mu_per_year",
                    c.market.mu_per_year,
                    "0 (diagnostics average over a driftless mid)",
                ));
            }
            if m.gamma_end_per_share.is_some_and(|g| g != m.gamma_per_share) {
                return Err(range_err(
                    "market.gamma_end_per_share",
                    m.gamma_end_per_share.unwrap(),
                    "equal to gamma_per_share (diagnostics use constant slopes)",
                ));
            }
            if m.delta_end_per_share.is_some_and(|d| d != m.delta_per_share) {
                return Err(range_err(
                    "market.delta_end_per_share",
                    m.delta_end_per_share.unwrap(),
                    "equal to delta_per_share (diagnostics use constant slopes)",
                ));
            }
        }
        ExperimentKind::Convergence => {
            if !c.grid.cells.is_power_of_two() {
                return Err(range_err(
                    "grid.cells",
                    c.grid.cells,
                    "a power of two (dyadic refinement)",
                ));
            }
            if c.grid.refinement_levels < 2 {
                return Err(range_err("grid.refinement_levels", c.grid.refinement_levels, ">= 2"));
            }
            if c.grid.cells >> (c.grid.refinement_levels - 1) == 0 {
                return Err(range_err(
                    "grid.refinement_levels",
                    c.grid.refinement_levels,
                    "coarsest level must keep at least one cell",
                ));
            }
            if c.grid.kind != GridKind::Uniform {
                return Err(range_err(
                    "grid.kind",
                    "random",
                    "uniform (refinement levels must nest)",
                ));
            }
        }
        _ => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_HEDGE: &str = r#"
        [experiment]
        kind = "hedge"
        seed = 7

        [market]
        initial_mid = 100.0
        sigma_per_sqrt_year = 0.2
        gamma_per_share = 0.05
        delta_per_share = 0.05

        [grid]
        horizon_years = 1.0

        [hedge]
        strike = 100.0
        maturity_years = 1.0
    "#;

    #[test]
    fn minimal_hedge_config_fills_documented_defaults() {
        let c = parse_config(MINIMAL_HEDGE).unwrap();
        assert_eq!(c.experiment.kind, ExperimentKind::Hedge);
        assert_eq!(c.grid.cells, 1024);
        assert_eq!(c.grid.refinement_levels, 4);
        assert_eq!(c.grid.kind, GridKind::Uniform);
        assert_eq!(c.market.mu_per_year, 0.0);
        let h = c.hedge.unwrap();
        assert_eq!(h.n_paths, 10_000);
        assert_eq!(h.mollify_n, 0);
        assert_eq!(h.sigma_per_sqrt_year, None);
        assert!(c.experiment.output_dir.is_none());
    }

    #[test]
    fn negative_sigma_error_names_key_and_range() {
        let text = MINIMAL_HEDGE.replace("sigma_per_sqrt_year = 0.2", "sigma_per_sqrt_year = -0.2");
        let err = parse_config(&text).unwrap_err();
        match err {
            ConfigError::Range { key, value, range } => {
                assert_eq!(key, "market.sigma_per_sqrt_year");
                assert_eq!(value, "-0.2");
                assert_eq!(range, "[0, inf)");
            }
            other => panic!("expected range error, got {other}"),
        }
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let text = MINIMAL_HEDGE.replace(
            "initial_mid = 100.0",
            "initial_mid = 100.0\n        initial_mid = 90.0",
        );
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)), "got {err}");
        assert!(err.to_string().contains("duplicate"), "message: {err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = MINIMAL_HEDGE.replace(
            "initial_mid = 100.0",
            "initial_mid = 100.0\n        spread_bps = 3.0",
        );
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)), "got {err}");
        assert!(err.to_string().contains("spread_bps"), "message: {err}");
    }

    #[test]
    fn experiments_demand_their_sections() {
        let text = MINIMAL_HEDGE.replace("kind = \"hedge\"", "kind = \"ledger\"");
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(err, ConfigError::MissingSection { experiment: "ledger", section: "strategy" }),
            "got {err}"
        );
        let mut no_hedge = String::new();
        for line in MINIMAL_HEDGE.lines() {
            no_hedge.push_str(line);
            no_hedge.push('\n');
            if line.contains("[hedge]") {
                break;
            }
        }
        let text = no_hedge.replace("[hedge]", "");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::MissingSection { section: "hedge", .. }), "got {err}");
    }

    #[test]
    fn hedge_maturity_must_equal_horizon() {
        let text = MINIMAL_HEDGE.replace("maturity_years = 1.0", "maturity_years = 0.5");
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(err, ConfigError::Range { key: "hedge.maturity_years", .. }),
            "got {err}"
        );
    }

    const DIAG: &str = r#"
        [experiment]
        kind = "diagnostics"
        seed = 1

        [market]
        initial_mid = 100.0
        sigma_per_sqrt_year = 0.2
        gamma_per_share = 0.05
        delta_per_share = 0.05

        [grid]
        horizon_years = 1.0
        cells = 32

        [strategy]
        family = "piecewise_constant"
    "#;

    #[test]
    fn diagnostics_demand_a_driftless_mid_and_constant_slopes() {
        let c = parse_config(DIAG).unwrap();
        assert!(c.diagnostics.is_none());
        let text = DIAG.replace("sigma_per_sqrt_year = 0.2", "sigma_per_sqrt_year = 0.2\n        mu_per_year = 0.04");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Range { key: "market.mu_per_year", .. }), "got {err}");
        let text = DIAG.replace(
            "gamma_per_share = 0.05",
            "gamma_per_share = 0.05\n        gamma_end_per_share = 0.1",
        );
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(err, ConfigError::Range { key: "market.gamma_end_per_share", .. }),
            "got {err}"
        );
    }

    const CONV: &str = r#"
        [experiment]
        kind = "convergence"
        seed = 1

        [market]
        initial_mid = 100.0
        sigma_per_sqrt_year = 0.2
        gamma_per_share = 0.05
        delta_per_share = 0.05

        [grid]
        horizon_years = 1.0
        cells = 256
        refinement_levels = 4

        [strategy]
        family = "brownian"
    "#;

    #[test]
    fn convergence_wants_nesting_dyadic_grids() {
        let c = parse_config(CONV).unwrap();
        assert_eq!(c.convergence.clone().unwrap_or_default().mollify_ns, vec![2, 4, 8, 16]);
        let err = parse_config(&CONV.replace("cells = 256", "cells = 300")).unwrap_err();
        assert!(matches!(err, ConfigError::Range { key: "grid.cells", .. }), "got {err}");
        let err = parse_config(&CONV.replace("refinement_levels = 4", "refinement_levels = 1"))
            .unwrap_err();
        assert!(
            matches!(err, ConfigError::Range { key: "grid.refinement_levels", .. }),
            "got {err}"
        );
        let text = CONV.replace("cells = 256", "cells = 256\n        kind = \"random\"");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Range { key: "grid.kind", .. }), "got {err}");
        let text = format!("{CONV}\n[convergence]\nmollify_ns = [4, 2]\n");
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(err, ConfigError::Range { key: "convergence.mollify_ns", .. }),
            "got {err}"
        );
    }

    #[test]
    fn strategy_ranges_are_validated() {
        let text = DIAG.replace(
            "family = \"piecewise_constant\"",
            "family = \"piecewise_constant\"\n        max_size = -2.0",
        );
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Range { key: "strategy.max_size", .. }), "got {err}");
        let text = DIAG.replace(
            "family = \"piecewise_constant\"",
            "family = \"single_jump\"\n        jump_time_fraction = 1.5",
        );
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(err, ConfigError::Range { key: "strategy.jump_time_fraction", .. }),
            "got {err}"
        );
        let text = DIAG.replace(
            "family = \"piecewise_constant\"",
            "family = \"mollified\"\n        mollify_n = 0",
        );
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Range { key: "strategy.mollify_n", .. }), "got {err}");
    }
}
