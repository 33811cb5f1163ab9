//! Quote evaluation, curve regularity checks and the simulated mid.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use quotecurve::market::{
    check_assumptions, eval_quotes, simulate_mid_gbm, GbmParams, LinearCurve, MarketError,
    MarketPath, SlopeRamp, SupplyCurve, TabulatedCurve, ViolationKind,
};
use quotecurve::partition::Partition;

fn linear(mid: f64, gamma: f64, delta: f64) -> SupplyCurve {
    SupplyCurve::Linear(LinearCurve::constant_slopes(vec![mid], gamma, delta).unwrap())
}

/// Tabulated copy of a linear curve on [-range, range].
fn tabulate_linear(mid: f64, gamma: f64, delta: f64, range: f64) -> SupplyCurve {
    let volumes = vec![-range, 0.0, range];
    let ask = vec![vec![mid - range * gamma, mid, mid + range * gamma]];
    let bid = vec![vec![mid - range * delta, mid, mid + range * delta]];
    SupplyCurve::Tabulated(TabulatedCurve::new(volumes, ask, bid).unwrap())
}

#[test]
fn linear_quotes_and_marginals() {
    let c = linear(100.0, 0.5, 0.3);
    let q = eval_quotes(&c, 0, 2.0).unwrap();
    assert_eq!(q.ask, 101.0);
    assert_eq!(q.bid, 100.6);
    assert_eq!(q.mid, 100.8);
    assert_abs_diff_eq!(q.spread, 0.4, epsilon = 1e-13);
    assert_eq!(q.ask_slope, 0.5);
    assert_eq!(q.bid_slope, 0.3);

    let q0 = eval_quotes(&c, 0, 0.0).unwrap();
    assert_eq!(q0.ask, 100.0);
    assert_eq!(q0.bid, 100.0);
    assert_eq!(q0.mid, 100.0);
    assert_eq!(q0.spread, 0.0, "marginal spread of the linear family is zero");

    let qs = eval_quotes(&c, 0, -2.0).unwrap();
    assert_eq!(qs.ask, 99.0);
    assert_eq!(qs.bid, 99.4);
    assert!(qs.ask < qs.bid, "large sells may invert quotes below y = 0; not clamped");
}

#[test]
fn index_out_of_range() {
    let c = linear(100.0, 0.5, 0.3);
    assert_eq!(
        eval_quotes(&c, 1, 0.0).unwrap_err(),
        MarketError::IndexOutOfRange { index: 1, len: 1 }
    );
}

/// Dual route: the tabulated representation of a linear curve must quote
/// identically to the closed form inside the tabulated range.
#[test]
fn tabulated_matches_linear_inside_range() {
    let lin = linear(50.0, 0.25, 0.125);
    let tab = tabulate_linear(50.0, 0.25, 0.125, 8.0);
    for &y in &[-8.0, -3.7, -1e-9, 0.0, 1e-9, 2.5, 8.0] {
        let a = eval_quotes(&lin, 0, y).unwrap();
        let b = eval_quotes(&tab, 0, y).unwrap();
        assert_abs_diff_eq!(a.ask, b.ask, epsilon = 1e-12);
        assert_abs_diff_eq!(a.bid, b.bid, epsilon = 1e-12);
        assert_abs_diff_eq!(a.mid, b.mid, epsilon = 1e-12);
        assert_abs_diff_eq!(a.spread, b.spread, epsilon = 1e-12);
        assert_abs_diff_eq!(a.ask_slope, b.ask_slope, epsilon = 1e-12);
        assert_abs_diff_eq!(a.bid_slope, b.bid_slope, epsilon = 1e-12);
    }
}

#[test]
fn tabulated_range_is_enforced() {
    let tab = tabulate_linear(50.0, 0.25, 0.125, 8.0);
    assert!(matches!(
        eval_quotes(&tab, 0, 8.0001),
        Err(MarketError::VolumeOutOfRange { .. })
    ));
    assert!(matches!(
        eval_quotes(&tab, 0, -8.0001),
        Err(MarketError::VolumeOutOfRange { .. })
    ));
}

/// Slopes at a node are one-sided in the direction the order walks:
/// buys take the right segment, sells the left one.
#[test]
fn tabulated_node_slopes_are_outward() {
    let volumes = vec![-4.0, -2.0, 0.0, 2.0, 4.0];
    // Piecewise-linear ask with slope 1 inside [-2, 2] and slope 3 outside.
    let ask = vec![vec![10.0 - 2.0 - 6.0, 10.0 - 2.0, 10.0, 10.0 + 2.0, 10.0 + 2.0 + 6.0]];
    // Bid mirrors with slopes 0.5 inside and 2 outside.
    let bid = vec![vec![9.0 - 1.0 - 4.0, 9.0 - 1.0, 9.0, 9.0 + 1.0, 9.0 + 1.0 + 4.0]];
    let c = SupplyCurve::Tabulated(TabulatedCurve::new(volumes, ask, bid).unwrap());

    let at_buy_node = eval_quotes(&c, 0, 2.0).unwrap();
    assert_eq!(at_buy_node.ask_slope, 3.0, "buy at a node reads the outward (right) segment");
    let at_sell_node = eval_quotes(&c, 0, -2.0).unwrap();
    assert_eq!(at_sell_node.ask_slope, 3.0, "sell at a node reads the outward (left) segment");
    let zero = eval_quotes(&c, 0, 0.0).unwrap();
    assert_eq!(zero.ask_slope, 1.0);
    assert_eq!(zero.bid_slope, 0.5);
    // Quote values at nodes are continuous regardless of the side.
    assert_eq!(at_sell_node.ask, 8.0);
    assert_eq!(at_sell_node.bid, 8.0);
}

#[test]
fn tabulated_construction_rejects_bad_tables() {
    let err = |v: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>| TabulatedCurve::new(v, a, b).is_err();
    assert!(err(vec![0.0], vec![vec![1.0]], vec![vec![1.0]]), "one volume");
    assert!(
        err(vec![-1.0, 1.0], vec![vec![1.0, 2.0]], vec![vec![0.5, 1.5]]),
        "volume grid must contain zero"
    );
    assert!(
        err(vec![0.0, 1.0, 1.0], vec![vec![1.0; 3]], vec![vec![0.5; 3]]),
        "volumes must strictly increase"
    );
    assert!(
        err(vec![-1.0, 0.0, 1.0], vec![vec![1.0, 2.0]], vec![vec![0.5; 3]]),
        "row length must match"
    );
}

#[test]
fn assumption_check_passes_valid_curves_and_flags_bad_slopes() {
    let probes = [-4.0, -1.0, 0.5, 4.0];
    let good = linear(100.0, 0.5, 0.3);
    let report = check_assumptions(&good, &probes);
    assert!(report.passed());
    // 4 given probes plus the always-added y = 0.
    assert_eq!(report.probes, 5);

    // Zero-spread boundary (equal slopes) is allowed.
    let boundary = linear(100.0, 0.5, 0.5);
    assert!(check_assumptions(&boundary, &probes).passed());

    // A flat ask against a rising bid breaks monotonicity and also
    // inverts the spread at positive volume; both kinds must show up.
    let flat_ask = linear(100.0, 0.0, 0.3);
    let report = check_assumptions(&flat_ask, &probes);
    assert!(!report.passed());
    assert!(report.violations.iter().any(|v| v.kind == ViolationKind::AskSlopeNotPositive));
    assert!(report.violations.iter().any(|v| v.kind == ViolationKind::SpreadInverted));

    let downward_bid = linear(100.0, 0.5, -0.2);
    let report = check_assumptions(&downward_bid, &probes);
    assert!(report.violations.iter().any(|v| v.kind == ViolationKind::BidSlopeNotPositive));
    // delta > gamma also inverts the quoted spread at positive volume.
    let inverted = linear(100.0, 0.1, 0.5);
    let report = check_assumptions(&inverted, &probes);
    assert!(report.violations.iter().any(|v| v.kind == ViolationKind::SpreadInverted));
}

#[test]
fn assumption_check_skips_probes_outside_tabulated_range_and_lists_nonpositive_quotes() {
    let tab = tabulate_linear(50.0, 0.25, 0.125, 8.0);
    let report = check_assumptions(&tab, &[-20.0, -8.0, 3.0, 20.0]);
    // -20 and 20 are outside the table; -8, 3 and the added 0 remain.
    assert_eq!(report.probes, 3);
    assert!(report.passed());
    assert!(report.nonpositive_quotes.is_empty());

    // A steep curve pushes the bid negative at large sells; this is
    // reported but is not a monotonicity violation.
    let steep = linear(1.0, 0.5, 0.4);
    let report = check_assumptions(&steep, &[-10.0, 10.0]);
    assert!(report.passed());
    assert_eq!(report.nonpositive_quotes, vec![(0, -10.0)]);
}

#[test]
fn gbm_is_deterministic_per_seed_and_stream() {
    let grid = Partition::uniform(1.0, 16).unwrap();
    let p = GbmParams { mu: 0.0, sigma: 0.3, initial_mid: 100.0 };
    let a = simulate_mid_gbm(p, &grid, 42, 7, SlopeRamp::constant(0.1), SlopeRamp::constant(0.1))
        .unwrap();
    let b = simulate_mid_gbm(p, &grid, 42, 7, SlopeRamp::constant(0.1), SlopeRamp::constant(0.1))
        .unwrap();
    let c = simulate_mid_gbm(p, &grid, 42, 8, SlopeRamp::constant(0.1), SlopeRamp::constant(0.1))
        .unwrap();
    let d = simulate_mid_gbm(p, &grid, 43, 7, SlopeRamp::constant(0.1), SlopeRamp::constant(0.1))
        .unwrap();
    assert_eq!(a.mid, b.mid);
    assert_ne!(a.mid, c.mid);
    assert_ne!(a.mid, d.mid);
    assert_eq!(a.seed, Some((42, 7)));
}

/// Oracle: with sigma = 0 the path is the deterministic exponential; the
/// value at t = 1 for mu = 0.5 is e^0.5, frozen here as a constant rather
/// than recomputed through the library's own exponential.
#[test]
fn gbm_zero_volatility_is_exact_exponential() {
    let grid = Partition::uniform(1.0, 4).unwrap();
    let p = GbmParams { mu: 0.5, sigma: 0.0, initial_mid: 1.0 };
    let path =
        simulate_mid_gbm(p, &grid, 1, 1, SlopeRamp::constant(0.0), SlopeRamp::constant(0.0))
            .unwrap();
    const E_HALF: f64 = 1.648_721_270_700_128_2;
    assert_abs_diff_eq!(path.mid[4], E_HALF, epsilon = 1e-12);
    assert_abs_diff_eq!(path.mid[2], E_HALF.sqrt(), epsilon = 1e-12);
}

/// Oracle: a driftless GBM is a martingale, E[M_T] = M_0. The sample mean
/// over n paths has standard error M_0 sqrt((e^(sigma^2 T) - 1) / n).
#[test]
fn gbm_driftless_mean_is_martingale() {
    let grid = Partition::uniform(1.0, 1).unwrap();
    let p = GbmParams { mu: 0.0, sigma: 0.2, initial_mid: 100.0 };
    let n = 40_000u64;
    let mut sum = 0.0;
    for s in 0..n {
        let path =
            simulate_mid_gbm(p, &grid, 5, s, SlopeRamp::constant(0.0), SlopeRamp::constant(0.0))
                .unwrap();
        sum += path.mid[1];
    }
    let mean = sum / n as f64;
    let se = 100.0 * (((0.2f64 * 0.2).exp() - 1.0) / n as f64).sqrt();
    assert!(
        (mean - 100.0).abs() < 4.0 * se,
        "mean {mean} vs 100 (se {se}); martingale property violated"
    );
}

/// Oracle: log increments have mean (mu - sigma^2/2) T and variance
/// sigma^2 T; checked against the closed form, not the generator.
#[test]
fn gbm_log_moments_match_closed_form() {
    let grid = Partition::uniform(2.0, 1).unwrap();
    let p = GbmParams { mu: 0.1, sigma: 0.4, initial_mid: 1.0 };
    let n = 40_000u64;
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for s in 0..n {
        let path =
            simulate_mid_gbm(p, &grid, 6, s, SlopeRamp::constant(0.0), SlopeRamp::constant(0.0))
                .unwrap();
        let x = path.mid[1].ln();
        sum += x;
        sum2 += x * x;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum2 - nf * mean * mean) / (nf - 1.0);
    let want_mean = (0.1 - 0.5 * 0.4 * 0.4) * 2.0;
    let want_var = 0.4 * 0.4 * 2.0;
    let se_mean = (want_var / nf).sqrt();
    assert!((mean - want_mean).abs() < 4.0 * se_mean);
    // SE of the sample variance of a normal is var * sqrt(2/(n-1)).
    let se_var = want_var * (2.0 / (nf - 1.0)).sqrt();
    assert!((var - want_var).abs() < 4.0 * se_var);
}

#[test]
fn slope_ramps_interpolate_linearly_in_time() {
    let grid = Partition::uniform(2.0, 4).unwrap();
    let p = GbmParams { mu: 0.0, sigma: 0.1, initial_mid: 100.0 };
    let path =
        simulate_mid_gbm(p, &grid, 3, 0, SlopeRamp { start: 0.1, end: 0.5 }, SlopeRamp::constant(0.2))
            .unwrap();
    for (got, want) in path.gamma.iter().zip([0.1, 0.2, 0.3, 0.4, 0.5]) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
    }
    assert_eq!(path.delta, vec![0.2; 5]);
}

#[test]
fn from_parts_validates_lengths_and_positivity() {
    let grid = Partition::uniform(1.0, 2).unwrap();
    assert!(MarketPath::from_parts(grid.clone(), vec![1.0; 3], vec![0.1; 3], vec![0.1; 3]).is_ok());
    assert!(MarketPath::from_parts(grid.clone(), vec![1.0; 2], vec![0.1; 3], vec![0.1; 3]).is_err());
    assert!(
        MarketPath::from_parts(grid, vec![1.0, 0.0, 1.0], vec![0.1; 3], vec![0.1; 3]).is_err(),
        "mid must stay strictly positive"
    );
}

proptest! {
    /// Quote identities hold at every point: mid is the average, spread
    /// the difference, and the linear family's marginal spread is zero.
    #[test]
    fn quote_identities(
        mid in 1.0f64..200.0,
        gamma in 1e-6f64..2.0,
        delta in 1e-6f64..2.0,
        y in -50.0f64..50.0,
    ) {
        let c = linear(mid, gamma, delta);
        let q = eval_quotes(&c, 0, y).unwrap();
        prop_assert!((q.mid - 0.5 * (q.ask + q.bid)).abs() <= 1e-12 * mid);
        prop_assert!((q.spread - (q.ask - q.bid)).abs() <= 1e-12 * mid);
        let q0 = eval_quotes(&c, 0, 0.0).unwrap();
        prop_assert_eq!(q0.spread, 0.0);
        prop_assert_eq!(q0.ask, mid);
    }

    /// Upward slopes make the ask increase and the bid decrease with the
    /// order size, pointwise.
    #[test]
    fn buys_pay_more_sells_receive_less(
        gamma in 1e-4f64..1.0,
        delta in 1e-4f64..1.0,
        y in 1e-3f64..20.0,
    ) {
        let c = linear(100.0, gamma, delta);
        let buy = eval_quotes(&c, 0, y).unwrap();
        let sell = eval_quotes(&c, 0, -y).unwrap();
        let q0 = eval_quotes(&c, 0, 0.0).unwrap();
        prop_assert!(buy.ask > q0.ask);
        prop_assert!(sell.bid < q0.bid);
    }
}
