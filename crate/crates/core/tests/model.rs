use ou_sldp::model::BOUNDARY_TOL;
use ou_sldp::{classify_case, effective_domain, finite_t_domain, rate_function, Regime};
use proptest::prelude::*;

/// Defining inequalities of each tag, restated independently of the classifier.
fn tag_holds(r: Regime, th: f64, c: f64) -> bool {
    let eq = |x: f64, y: f64| (x - y).abs() <= BOUNDARY_TOL;
    use Regime::*;
    match r {
        UnstableZero => eq(th, 0.0) && eq(c, 0.0),
        UnstableLeft => eq(th, 0.0) && c < 0.0,
        UnstableRight => eq(th, 0.0) && c > 0.0,
        StableZero => th < 0.0 && eq(c, 0.0),
        StableCritical => th < 0.0 && eq(c, th / 3.0),
        StableAtTheta => th < 0.0 && eq(c, th),
        StableLeft => th < 0.0 && c < th,
        StableInner => th < 0.0 && th < c && c < th / 3.0,
        StableRight => th < 0.0 && c > th / 3.0,
        ExplosiveZero => th > 0.0 && eq(c, 0.0),
        ExplosiveAtTheta => th > 0.0 && eq(c, th),
        ExplosiveCritical => th > 0.0 && eq(c, -th),
        ExplosiveLeft => th > 0.0 && c < -th,
        ExplosiveRight => th > 0.0 && c > th,
        ExplosiveValley => th > 0.0 && -th < c && c < th,
    }
}

#[test]
fn classification_partitions_a_dense_grid() {
    for i in -60..=60 {
        for j in -120..=120 {
            let th = i as f64 / 20.0;
            let c = j as f64 / 20.0;
            let r = classify_case(th, c).unwrap();
            assert!(tag_holds(r, th, c), "{th} {c} {r}");
        }
    }
}

#[test]
fn classifier_snaps_within_tolerance() {
    assert_eq!(classify_case(1.0, 1.0 + 5e-13).unwrap(), Regime::ExplosiveAtTheta);
    assert_eq!(classify_case(1.0, -1.0 - 5e-13).unwrap(), Regime::ExplosiveCritical);
    assert_eq!(classify_case(-3.0, -1.0 + 5e-13).unwrap(), Regime::StableCritical);
    assert_eq!(classify_case(1.0, 1.0 + 1e-9).unwrap(), Regime::ExplosiveRight);
}

#[test]
fn rate_jump_at_theta() {
    for &th in &[0.5, 1.0, 3.0] {
        assert_eq!(rate_function(th, th).unwrap(), 0.0);
        for s in [-1.0, 1.0] {
            let i = rate_function(th, th + s * 1e-6).unwrap();
            assert!((i - th).abs() < 2.0 * 1e-6 + 1e-9, "{th} {s} {i}");
        }
    }
    // Stable side is continuous through θ.
    assert!(rate_function(-1.0, -1.0 + 1e-6).unwrap() < 1e-11);
}

#[test]
fn rate_continuous_away_from_theta() {
    for &th in &[-2.0, -1.0, -0.3, 0.0, 0.4, 1.0, 2.5] {
        let n = 10_000;
        let (lo, hi) = (-6.0, 6.0);
        let h = (hi - lo) / n as f64;
        let mut prev = rate_function(th, lo).unwrap();
        for k in 1..=n {
            let c = lo + k as f64 * h;
            let cur = rate_function(th, c).unwrap();
            let straddles = (c - th) * (c - h - th) <= 0.0 && th > 0.0;
            if !straddles {
                // Lipschitz on the grid: slope is at most max(2, |c|/4 + ...) here.
                assert!((cur - prev).abs() < 4.0 * h, "{th} {c}");
            }
            prev = cur;
        }
    }
}

#[test]
fn effective_domain_endpoints_converge() {
    for &(th, c) in &[(1.0, 2.0), (1.0, 0.5), (-1.0, -0.5), (-1.0, 0.5), (1.0, -2.0)] {
        let base = effective_domain(th, c).unwrap();
        let mut prev_gap = f64::INFINITY;
        for &t in &[0.5, 1.0, 2.0, 4.0, 8.0] {
            let d = finite_t_domain(th, c, t).unwrap();
            assert!(d.lower <= base.lower && d.upper >= base.upper, "{th} {c} {t}");
            let gap = (d.upper - base.upper) + if base.lower.is_finite() { base.lower - d.lower } else { 0.0 };
            assert!(gap <= prev_gap, "{th} {c} {t}");
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-3, "{th} {c} {prev_gap}");
    }
}

proptest! {
    #[test]
    fn rate_nonnegative_and_zero_only_at_theta(th in -4.0f64..4.0, c in -8.0f64..8.0) {
        let i = rate_function(th, c).unwrap();
        prop_assert!(i >= 0.0);
        if (c - th).abs() > 1e-6 && th.abs() > 1e-6 {
            prop_assert!(i > 0.0);
        }
    }

    #[test]
    fn domain_points_satisfy_definition(th in -3.0f64..3.0, c in -5.0f64..5.0, u in 0.001f64..0.999) {
        prop_assume!(c.abs() > 1e-3 && (c - th).abs() > 1e-3);
        let d = effective_domain(th, c).unwrap();
        let lo = if d.lower.is_finite() { d.lower } else { d.upper - 10.0 };
        let a = lo + u * (d.upper - lo);
        let r = th * th + 2.0 * a * c;
        prop_assert!(r > 0.0);
        prop_assert!(a + th < r.sqrt());
    }

    #[test]
    fn finite_horizon_domain_contains_limit(th in -3.0f64..3.0, c in -5.0f64..5.0, t in 0.1f64..30.0) {
        prop_assume!(c.abs() > 1e-3 && (c - th).abs() > 1e-3);
        let base = effective_domain(th, c).unwrap();
        let d = finite_t_domain(th, c, t).unwrap();
        prop_assert!(d.lower <= base.lower && d.upper >= base.upper);
    }
}
