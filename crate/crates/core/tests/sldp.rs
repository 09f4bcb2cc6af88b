use std::f64::consts::{E, PI};

use ou_sldp::oracle::oracle_tail;
use ou_sldp::sldp::{
    expansion_constants, max_order, tail_probability, zero_threshold_exact, zero_threshold_value,
};
use ou_sldp::{classify_case, rate_function, Regime};

#[test]
fn slope_law() {
    for &(th, c) in &[
        (-1.0, -2.0),
        (-1.0, -0.6),
        (-1.0, 0.5),
        (-1.0, -1.0 / 3.0),
        (-1.0, 0.0),
        (1.0, -2.0),
        (1.0, -1.0),
        (1.0, 0.5),
        (1.0, 0.0),
        (1.0, 2.0),
        (0.0, -1.0),
        (0.0, 1.0),
    ] {
        let i = rate_function(th, c).unwrap();
        for &t in &[10.0, 20.0, 40.0, 80.0] {
            let p = tail_probability(th, c, t, 0).unwrap();
            let gap = (-p.log_probability / t - i).abs();
            assert!(gap <= 2.0 * t.ln() / t, "{th} {c} {t}: {gap}");
        }
    }
}

#[test]
fn zero_threshold_orders_improve() {
    for &t in &[5.0, 8.0] {
        let exact = zero_threshold_value(1.0, t).unwrap();
        let mut prev = f64::INFINITY;
        for p in 0..4 {
            let err = (zero_threshold_exact(1.0, t, p).unwrap().probability - exact).abs();
            if prev < 4.0 * f64::EPSILON * exact {
                break;
            }
            assert!(err < prev, "{t} {p}");
            prev = err;
        }
    }
}

#[test]
fn zero_threshold_complement() {
    // P(θ̂ ≤ 0) = P(|N| ≤ d_T) and P(θ̂ > 0) = P(|N| > d_T).
    for &(th, t) in &[(1.0, 1.0), (1.0, 5.0), (-1.0, 3.0), (-0.5, 20.0)] {
        let s = (2.0f64 * th * t).exp_m1() / (2.0 * th);
        let d = (t / s).sqrt().max(0.0);
        let inside = libm::erf(d / 2f64.sqrt());
        let outside = libm::erfc(d / 2f64.sqrt());
        assert!((inside + outside - 1.0).abs() < 1e-15);
        let v = zero_threshold_value(th, t).unwrap();
        let expect = if th > 0.0 { inside } else { outside };
        assert!((v - expect).abs() <= 1e-14 * expect, "{th} {t}");
    }
}

#[test]
fn stable_zero_series_near_exact() {
    for &t in &[10.0, 20.0] {
        let exact = zero_threshold_value(-1.0, t).unwrap();
        for p in 1..=3 {
            let s = tail_probability(-1.0, 0.0, t, p).unwrap();
            assert!((s.probability / exact - 1.0).abs() < 0.05, "{t} {p}");
        }
    }
}

#[test]
fn explosive_critical_scaling() {
    // P·e^{TI}·T^{-1/4} → (eθ)^{1/4} e^{-1/4} Γ(3/4)/π with an O(1/√T) gap.
    let th = 1.0;
    let limit = (E * th).powf(0.25) * (-0.25f64).exp() * libm::tgamma(0.75) / PI;
    let mut scaled = Vec::new();
    for &t in &[10.0, 40.0, 160.0] {
        let o = oracle_tail(th, -th, t).unwrap();
        let v = (o.log_probability + t * th).exp() * t.powf(-0.25);
        scaled.push((v / limit - 1.0) * t.sqrt());
    }
    // √T·(ratio − 1) settles to a constant.
    assert!((scaled[2] - scaled[1]).abs() < 0.5 * (scaled[1] - scaled[0]).abs(), "{scaled:?}");
}

#[test]
fn order_one_beats_order_zero() {
    for &(th, c) in &[(1.0, 2.0), (1.0, 0.5), (1.0, -1.0)] {
        let o = oracle_tail(th, c, 10.0).unwrap().probability;
        let g0 = (tail_probability(th, c, 10.0, 0).unwrap().probability / o - 1.0).abs();
        let g1 = (tail_probability(th, c, 10.0, 1).unwrap().probability / o - 1.0).abs();
        assert!(g1 < g0 && g1 < 0.02, "{th} {c}: {g0} {g1}");
    }
}

#[test]
fn order_limits_are_enforced() {
    assert_eq!(max_order(Regime::StableLeft), Some(0));
    assert!(tail_probability(-1.0, -2.0, 10.0, 1).is_err());
    assert!(tail_probability(1.0, 1.0, 10.0, 0).is_err());
}

#[test]
fn constants_finite_on_grid() {
    for i in -40..=40 {
        for j in -80..=80 {
            let (th, c) = (i as f64 / 10.0, j as f64 / 10.0 + 0.05);
            let r = classify_case(th, c).unwrap();
            let Ok(k) = expansion_constants(th, c) else {
                assert!(matches!(r, Regime::StableAtTheta | Regime::ExplosiveAtTheta | Regime::UnstableZero));
                continue;
            };
            let vals = [
                k.a_c, k.h_of_ac, k.k_of_c, k.j_of_c, k.p_of_c, k.gamma1, k.delta, k.delta1, k.beta0,
                k.b_limit, k.a_theta,
            ];
            assert!(vals.iter().flatten().all(|v| v.is_finite()), "{th} {c} {k:?}");
            for s in [k.sigma_c_sq, k.sigma_theta_sq].into_iter().flatten() {
                assert!(s > 0.0 && s.is_finite(), "{th} {c}");
            }
        }
    }
}
