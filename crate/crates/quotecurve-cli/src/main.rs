//! Batch experiment runner over the quotecurve library.
//!
//! Reads a TOML experiment configuration, simulates, writes fixed-schema
//! CSV files plus a `manifest.csv` with content hashes, and exits 0 only
//! if every internal invariant check passed. Identical (config, seed)
//! produce byte-identical files regardless of worker count: per-path RNG
//! streams make results independent of execution order, and reductions
//! run in path order.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Parser;
use rayon::prelude::*;

use config::{
    parse_config, Config, ExperimentKind, FamilyKind, GridKind, StrategySection, TerminalKind,
};
use output::{field, manifest, sha256_hex, Artifact, Check, CsvBuilder};

use quotecurve::continuous::{cost_process_on_grid, time_literal_cost};
use quotecurve::diagnostics::{
    arbitrage_probe, supermartingale_test, StrategyFamily, StrategyGenerator,
};
use quotecurve::hedging::{
    aggregate_hedge, hedge_initial_value, hedge_single_path, mollify_strategy, CallSpec,
    HedgeSetup,
};
use quotecurve::market::{
    check_assumptions, eval_quotes, simulate_mid_gbm, GbmParams, MarketPath, SlopeRamp,
    SupplyCurve,
};
use quotecurve::partition::{
    make_dyadic_to, make_random, quadratic_variation, Partition, PartitionSequence,
};
use quotecurve::portfolio::{
    decompose_costs, run_ledger, Ledger, StrategyPath, TerminalRule,
};

/// Simulation experiments on volume-dependent quote curves.
#[derive(Debug, Parser)]
#[command(name = "quotecurve", version)]
struct Cli {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for path-parallel experiments; 0 means one per core.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory. Falls back to the config's output_dir, then the
    /// QUOTECURVE_OUT environment variable, then the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let config_bytes = std::fs::read(&cli.config)
        .with_context(|| format!("reading config {}", cli.config.display()))?;
    let config_sha = sha256_hex(&config_bytes);
    let text = String::from_utf8(config_bytes).context("config is not UTF-8")?;
    let config = parse_config(&text)?;

    let seed = cli.seed.unwrap_or(config.experiment.seed);
    let out_dir = cli
        .out
        .or_else(|| config.experiment.output_dir.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os("QUOTECURVE_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    let kind = config.experiment.kind;
    println!("experiment: {}", kind.name());
    println!("seed: {seed}");
    println!("output: {}", out_dir.display());

    let started = Instant::now();
    let (artifacts, checks) = match kind {
        ExperimentKind::Simulate => run_simulate(&config, seed)?,
        ExperimentKind::Ledger => run_ledger_experiment(&config, seed)?,
        ExperimentKind::CostProcess => run_cost_process(&config, seed)?,
        ExperimentKind::Hedge => run_hedge(&config, seed, cli.workers)?,
        ExperimentKind::Convergence => run_convergence(&config, seed)?,
        ExperimentKind::Diagnostics => run_diagnostics(&config, seed)?,
    };
    // Wall time never goes into the files: it would break the
    // byte-identical rerun contract.
    println!("runtime_seconds: {:.3}", started.elapsed().as_secs_f64());

    let manifest_file = manifest(
        kind.name(),
        seed,
        &config_sha,
        quotecurve::VERSION,
        env!("CARGO_PKG_VERSION"),
        &artifacts,
    )?;
    for artifact in artifacts.iter().chain(std::iter::once(&manifest_file)) {
        std::fs::write(out_dir.join(artifact.name), &artifact.bytes)
            .with_context(|| format!("writing {}", artifact.name))?;
        println!("wrote {} ({} rows)", artifact.name, artifact.rows);
    }

    let mut all_pass = true;
    for check in &checks {
        if check.pass {
            println!("check {}: ok", check.name);
        } else {
            all_pass = false;
            eprintln!("FAILED {}: {}", check.name, check.detail);
        }
    }
    Ok(all_pass)
}

fn build_grid(config: &Config, seed: u64) -> Result<Partition> {
    let g = &config.grid;
    let grid = match g.kind {
        GridKind::Uniform => Partition::uniform(g.horizon_years, g.cells)?,
        GridKind::Random => make_random(g.horizon_years, g.cells, seed)?,
    };
    Ok(grid)
}

fn build_market(config: &Config, grid: &Partition, seed: u64, stream: u64) -> Result<MarketPath> {
    let m = &config.market;
    let market = simulate_mid_gbm(
        gbm_params(config),
        grid,
        seed,
        stream,
        SlopeRamp {
            start: m.gamma_per_share,
            end: m.gamma_end_per_share.unwrap_or(m.gamma_per_share),
        },
        SlopeRamp {
            start: m.delta_per_share,
            end: m.delta_end_per_share.unwrap_or(m.delta_per_share),
        },
    )?;
    Ok(market)
}

fn gbm_params(config: &Config) -> GbmParams {
    GbmParams {
        mu: config.market.mu_per_year,
        sigma: config.market.sigma_per_sqrt_year,
        initial_mid: config.market.initial_mid,
    }
}

fn strategy_generator(section: &StrategySection, seed: u64) -> StrategyGenerator {
    let family = match section.family {
        FamilyKind::PiecewiseConstant => StrategyFamily::PiecewiseConstantRandom {
            trades: section.trades,
            max_size: section.max_size,
        },
        FamilyKind::Brownian => StrategyFamily::BrownianSampled { scale: section.scale },
        FamilyKind::Mollified => {
            StrategyFamily::Mollified { scale: section.scale, n: section.mollify_n }
        }
        FamilyKind::SingleJump => StrategyFamily::SingleJump {
            size: section.jump_size,
            time_fraction: section.jump_time_fraction,
        },
        FamilyKind::BuyAndHold => StrategyFamily::BuyAndHold { size: section.size },
    };
    let terminal = match section.terminal {
        TerminalKind::Liquidate => TerminalRule::Liquidate,
        TerminalKind::MarkOnly => TerminalRule::MarkOnly,
    };
    StrategyGenerator { family, terminal, seed }
}

fn strategy_section(config: &Config) -> Result<&StrategySection> {
    config.strategy.as_ref().context("missing [strategy] section")
}

fn partition_csv(grid: &Partition) -> Result<Artifact> {
    let mut csv = CsvBuilder::new("partition.csv", &["t"])?;
    for &t in grid.times() {
        csv.row(&[field(t)])?;
    }
    csv.finish()
}

fn market_csv(market: &MarketPath) -> Result<Artifact> {
    let mut csv = CsvBuilder::new("market.csv", &["t", "mid", "gamma", "delta"])?;
    for (i, &t) in market.grid.times().iter().enumerate() {
        csv.row(&[field(t), field(market.mid[i]), field(market.gamma[i]), field(market.delta[i])])?;
    }
    csv.finish()
}

fn ledger_csv(ledger: &Ledger) -> Result<Artifact> {
    let mut csv = CsvBuilder::new(
        "ledger.csv",
        &["t", "z0", "z1", "trade", "cash_flow", "value", "sign"],
    )?;
    for e in &ledger.entries {
        csv.row(&[
            field(e.t),
            field(e.z0),
            field(e.z1),
            field(e.trade),
            field(e.cash_flow),
            field(e.value),
            field(e.sign),
        ])?;
    }
    csv.finish()
}

/// Probe volumes for curve assumption checks, spanning both sides of the
/// book at a few depths.
const ASSUMPTION_PROBES: [f64; 6] = [-2.0, -1.0, -0.25, 0.25, 1.0, 2.0];

fn assumption_check(curve: &SupplyCurve) -> Check {
    let report = check_assumptions(curve, &ASSUMPTION_PROBES);
    Check::new(
        "curve_assumptions",
        report.passed(),
        format!("{} violations over {} probes", report.violations.len(), report.probes),
    )
}

/// Re-derives every cash flow through the mid/spread route and compares
/// with the executed ledger: the two must agree to relative 1e-12.
fn self_financing_check(
    curve: &SupplyCurve,
    ledger: &Ledger,
) -> Result<Check> {
    let mut worst = 0.0_f64;
    for (i, e) in ledger.entries.iter().enumerate() {
        let expected = if e.trade == 0.0 {
            0.0
        } else {
            let q = eval_quotes(curve, i, e.trade)?;
            -q.mid * e.trade - 0.5 * q.spread * e.trade.abs()
        };
        let scale = e.cash_flow.abs().max(1.0);
        worst = worst.max((e.cash_flow - expected).abs() / scale);
    }
    Ok(Check::new(
        "self_financing",
        worst <= 1e-12,
        format!("worst relative cash-flow gap {worst:e}"),
    ))
}

fn decomposition_checks(
    dec: &quotecurve::portfolio::CostDecomposition,
) -> Vec<Check> {
    let scale = dec.v0.abs().max(dec.v_terminal.abs()).max(1.0);
    vec![
        Check::new(
            "decomposition",
            dec.residual.abs() <= 1e-10 * scale,
            format!("residual {:e} against scale {scale}", dec.residual),
        ),
        Check::new(
            "cost_nonnegative",
            dec.total_cost >= -1e-12 * scale,
            format!("total cost {}", dec.total_cost),
        ),
    ]
}

fn run_simulate(config: &Config, seed: u64) -> Result<(Vec<Artifact>, Vec<Check>)> {
    let grid = build_grid(config, seed)?;
    let market = build_market(config, &grid, seed, quotecurve::rng::MARKET_STREAM)?;
    let curve = SupplyCurve::linear_from_market(&market);
    let artifacts = vec![market_csv(&market)?, partition_csv(&grid)?];
    Ok((artifacts, vec![assumption_check(&curve)]))
}

fn run_ledger_experiment(config: &Config, seed: u64) -> Result<(Vec<Artifact>, Vec<Check>)> {
    let section = strategy_section(config)?;
    let grid = build_grid(config, seed)?;
    let market = build_market(config, &grid, seed, quotecurve::rng::MARKET_STREAM)?;
    let curve = SupplyCurve::linear_from_market(&market);
    let strategy = strategy_generator(section, seed).generate(&grid, 0)?;
    let ledger = run_ledger(&curve, &market, &strategy, section.initial_cash)?;
    let dec = decompose_costs(&ledger, &curve, &market)?;

    let mut decomposition = CsvBuilder::new(
        "decomposition.csv",
        &[
            "capital_gain",
            "spread_carry",
            "implicit_cost",
            "price_impact",
            "spread_impact",
            "total_cost",
            "v0",
            "v_terminal",
            "residual",
        ],
    )?;
    decomposition.row(&[
        field(dec.capital_gain),
        field(dec.spread_carry),
        field(dec.implicit_cost),
        field(dec.price_impact),
        field(dec.spread_impact),
        field(dec.total_cost),
        field(dec.v0),
        field(dec.v_terminal),
        field(dec.residual),
    ])?;

    let artifacts = vec![ledger_csv(&ledger)?, decomposition.finish()?];
    let mut checks = vec![self_financing_check(&curve, &ledger)?];
    checks.extend(decomposition_checks(&dec));
    Ok((artifacts, checks))
}

fn run_cost_process(config: &Config, seed: u64) -> Result<(Vec<Artifact>, Vec<Check>)> {
    let section = strategy_section(config)?;
    let grid = build_grid(config, seed)?;
    let market = build_market(config, &grid, seed, quotecurve::rng::MARKET_STREAM)?;
    let curve = SupplyCurve::linear_from_market(&market);
    let strategy = strategy_generator(section, seed).generate(&grid, 0)?;
    let cost = cost_process_on_grid(&curve, &strategy)?;
    // The same slopes integrated against time rather than squared trades.
    // Kept in the file for comparison; only `total` tracks the ledger.
    let literal = time_literal_cost(&market, &strategy)?;

    let mut csv = CsvBuilder::new(
        "cost_process.csv",
        &[
            "t",
            "total",
            "mid_slope_term",
            "mid_jump_term",
            "spread_slope_term",
            "spread_jump_term",
            "time_literal_total",
        ],
    )?;
    for (i, &t) in grid.times().iter().enumerate() {
        csv.row(&[
            field(t),
            field(cost.total[i]),
            field(cost.mid_slope[i]),
            field(cost.mid_jump[i]),
            field(cost.spread_slope[i]),
            field(cost.spread_jump[i]),
            field(literal[i]),
        ])?;
    }

    // Same friction, two routes: executed cash flows vs slope atoms.
    let ledger = run_ledger(&curve, &market, &strategy, section.initial_cash)?;
    let dec = decompose_costs(&ledger, &curve, &market)?;
    let gap = (cost.terminal() - dec.total_cost).abs();
    let scale = dec.total_cost.abs().max(1.0);
    let monotone = cost.total.windows(2).all(|w| w[1] >= w[0] - 1e-12);

    let checks = vec![
        Check::new(
            "cost_duality",
            gap <= 1e-10 * scale,
            format!("terminal {} vs ledger {}", cost.terminal(), dec.total_cost),
        ),
        Check::new(
            "cost_monotone",
            monotone && !cost.negative_increment,
            format!("negative_increment = {}", cost.negative_increment),
        ),
    ];
    Ok((vec![csv.finish()?], checks))
}

fn run_hedge(config: &Config, seed: u64, workers: usize) -> Result<(Vec<Artifact>, Vec<Check>)> {
    let section = config.hedge.as_ref().context("missing [hedge] section")?;
    let grid = build_grid(config, seed)?;
    let sigma = section.sigma_per_sqrt_year.unwrap_or(config.market.sigma_per_sqrt_year);
    let setup = HedgeSetup {
        call: CallSpec::new(section.strike, section.maturity_years, sigma)?,
        gbm: gbm_params(config),
        gamma: config.market.gamma_per_share,
        delta_slope: config.market.delta_per_share,
        mollify_n: section.mollify_n,
    };
    if config.market.gamma_end_per_share.is_some_and(|g| g != config.market.gamma_per_share)
        || config.market.delta_end_per_share.is_some_and(|d| d != config.market.delta_per_share)
    {
        bail!("hedge experiments use constant slopes; drop the *_end_per_share keys");
    }

    // Each path owns an RNG stream, so splitting across threads changes
    // nothing; collect preserves index order for the reduction.
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")?;
    let results = pool.install(|| {
        (0..section.n_paths)
            .into_par_iter()
            .map(|p| hedge_single_path(&setup, &grid, seed, p))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let report = aggregate_hedge(&results, grid.cells(), setup.mollify_n, hedge_initial_value(&setup))?;

    let mut paths = CsvBuilder::new(
        "hedge_paths.csv",
        &["path_index", "terminal_value", "payoff", "total_cost", "prediction"],
    )?;
    for r in &results {
        paths.row(&[
            field(r.path_index),
            field(r.terminal_value),
            field(r.payoff),
            field(r.total_cost),
            field(r.prediction),
        ])?;
    }

    let mut summary = CsvBuilder::new(
        "hedge_report.csv",
        &[
            "n_paths",
            "rebalance_cells",
            "mollify_n",
            "v0",
            "mean_terminal_value",
            "mean_payoff",
            "mean_total_cost",
            "cost_integral_prediction",
            "mean_cost_gap",
            "cost_gap_std_err",
            "l2_error",
            "l2_std_err",
            "mean_time_literal",
        ],
    )?;
    summary.row(&[
        field(report.n_paths),
        field(report.rebalance_cells),
        field(report.mollify_n),
        field(report.v0),
        field(report.mean_terminal_value),
        field(report.mean_payoff),
        field(report.mean_total_cost),
        field(report.cost_integral_prediction),
        field(report.mean_cost_gap),
        field(report.cost_gap_std_err),
        field(report.l2_error),
        field(report.l2_std_err),
        field(report.mean_time_literal),
    ])?;

    let tolerance = 3.0 * report.cost_gap_std_err + 1e-9 * report.mean_total_cost.abs().max(1.0);
    let checks = vec![Check::new(
        "cost_prediction",
        report.mean_cost_gap.abs() <= tolerance,
        format!("mean gap {} vs tolerance {}", report.mean_cost_gap, tolerance),
    )];
    Ok((vec![paths.finish()?, summary.finish()?], checks))
}

fn run_convergence(config: &Config, seed: u64) -> Result<(Vec<Artifact>, Vec<Check>)> {
    let section = strategy_section(config)?;
    let sweep = config.convergence.clone().unwrap_or_default();
    let seq = make_dyadic_to(config.grid.horizon_years, config.grid.cells, config.grid.refinement_levels)?;
    let grid = seq.finest().clone();
    let market = build_market(config, &grid, seed, quotecurve::rng::MARKET_STREAM)?;
    let curve = SupplyCurve::linear_from_market(&market);
    let raw = strategy_generator(section, seed).generate(&grid, 0)?;

    let qv_report = holdings_qv(&seq, &raw)?;
    let mut qv_csv = CsvBuilder::new(
        "qv.csv",
        &["level", "cells", "mesh", "qv_estimate", "cauchy_gap"],
    )?;
    for (k, level) in qv_report.levels.iter().enumerate() {
        qv_csv.row(&[
            field(k + 1),
            field(level.cells),
            field(level.mesh),
            field(level.qv),
            field(level.gap),
        ])?;
    }

    let members: Vec<StrategyPath> = sweep
        .mollify_ns
        .iter()
        .map(|&n| mollify_strategy(&raw, n))
        .collect::<Result<_, _>>()?;
    let suite = quotecurve::continuous::cost_convergence_suite(&members, &raw, &curve)?;

    let mut conv = CsvBuilder::new("convergence.csv", &["n", "T_n", "gap"])?;
    let mut mollify = CsvBuilder::new(
        "mollify.csv",
        &["n", "qv_estimate", "total_cost", "sup_gap"],
    )?;
    for (row, (&n, member)) in
        suite.rows.iter().zip(sweep.mollify_ns.iter().zip(members.iter()))
    {
        conv.row(&[field(n), field(row.cost), field(row.gap)])?;
        let qv: f64 = member
            .holdings
            .windows(2)
            .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
            .sum();
        let sup_gap = member
            .holdings
            .iter()
            .zip(raw.holdings.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        mollify.row(&[field(n), field(qv), field(row.cost), field(sup_gap)])?;
    }

    let artifacts = vec![conv.finish()?, mollify.finish()?, qv_csv.finish()?, partition_csv(&grid)?];
    let checks = vec![
        Check::new(
            "cost_trend",
            suite.trend_decreasing,
            format!("limit cost {}", suite.limit_cost),
        ),
        Check::new(
            "qv_bounded",
            !suite.qv_divergent,
            format!("qv sup {} vs limit {}", suite.qv_sup, suite.limit_qv),
        ),
    ];
    Ok((artifacts, checks))
}

/// Quadratic variation of the holdings path across the refining levels;
/// nested dyadic levels sample the finest grid exactly.
fn holdings_qv(
    seq: &PartitionSequence,
    strategy: &StrategyPath,
) -> Result<quotecurve::partition::QvReport> {
    let grid = &strategy.grid;
    let report = quadratic_variation(seq, |t| {
        let i = grid.index_of(t).expect("levels nest in the finest grid");
        strategy.holdings[i]
    })?;
    Ok(report)
}

fn run_diagnostics(config: &Config, seed: u64) -> Result<(Vec<Artifact>, Vec<Check>)> {
    let section = strategy_section(config)?;
    let diag = config.diagnostics.unwrap_or_default();
    let grid = build_grid(config, seed)?;
    let generator = strategy_generator(section, seed);
    let gbm = gbm_params(config);
    let gamma = config.market.gamma_per_share;
    let delta = config.market.delta_per_share;

    let drift = supermartingale_test(
        gbm,
        gamma,
        delta,
        &generator,
        &grid,
        diag.n_paths,
        diag.initial_cash,
        diag.alpha,
        seed,
    )?;
    let probe = arbitrage_probe(
        gbm,
        gamma,
        delta,
        &generator,
        &grid,
        diag.n_candidates,
        diag.n_paths,
        diag.alpha,
        seed,
    )?;

    let mut csv = CsvBuilder::new(
        "diagnostics.csv",
        &["test_name", "statistic", "std_err", "threshold", "pass"],
    )?;
    csv.row(&[
        field("supermartingale"),
        field(drift.mean_excess),
        field(drift.std_err),
        field(drift.threshold),
        field(drift.pass),
    ])?;
    csv.row(&[
        field("arbitrage_flags"),
        field(probe.flagged as f64),
        field(0.0),
        field(0.0),
        field(!probe.any_flagged()),
    ])?;

    let checks = vec![
        Check::new(
            "supermartingale",
            drift.pass,
            format!(
                "mean excess {} vs threshold {} over {} used paths",
                drift.mean_excess, drift.threshold, drift.n_used
            ),
        ),
        Check::new(
            "no_arbitrage",
            !probe.any_flagged(),
            format!("{} of {} candidates flagged", probe.flagged, probe.n_candidates),
        ),
    ];
    Ok((vec![csv.finish()?], checks))
}
