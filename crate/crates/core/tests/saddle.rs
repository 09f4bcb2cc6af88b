use ou_sldp::saddle::{series_coeffs, solve_saddle, SeriesScale};
use ou_sldp::{classify_case, finite_t_domain, Regime};
use proptest::prelude::*;

/// Least-squares slope of `log y` against `log x`.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[test]
fn series_error_slopes() {
    let ts = [50.0, 100.0, 200.0, 400.0];
    for &(th, c) in &[(1.0, 2.0), (1.0, 0.5), (-1.0, 1.0), (-1.0, -0.6), (1.0, -1.0)] {
        let s = series_coeffs(th, c).unwrap();
        // Two terms leave an O(ε²) error.
        let errs: Vec<f64> = ts
            .iter()
            .map(|&t| (solve_saddle(th, c, t).unwrap().a_t - s.a_at(t, 2)).abs())
            .collect();
        let x: Vec<f64> = ts.iter().map(|&t| s.scale.epsilon(t)).collect();
        let slope = loglog_slope(&x, &errs);
        assert!((slope - 2.0).abs() < 0.15, "{th} {c}: {slope}");
    }
}

#[test]
fn stable_critical_uses_sqrt_scale() {
    let s = series_coeffs(-1.0, -1.0 / 3.0).unwrap();
    assert_eq!(s.scale, SeriesScale::InverseSqrtT);
    let ts = [100.0, 400.0, 1600.0];
    let errs: Vec<f64> = ts
        .iter()
        .map(|&t| (solve_saddle(-1.0, -1.0 / 3.0, t).unwrap().a_t - s.a_at(t, 2)).abs())
        .collect();
    let x: Vec<f64> = ts.iter().map(|&t| 1.0 / t.sqrt()).collect();
    assert!((loglog_slope(&x, &errs) - 2.0).abs() < 0.15);
}

#[test]
fn explosive_right_border_limit() {
    for &(th, c) in &[(1.0, 2.0), (0.5, 3.0), (2.0, 2.5)] {
        let target = (c - th) / (th - 3.0 * c);
        let v: Vec<f64> = [100.0, 300.0, 1000.0]
            .iter()
            .map(|&t| {
                let s = solve_saddle(th, c, t).unwrap();
                t * (s.phi_at + s.a_t + th)
            })
            .collect();
        assert!((v[2] - target).abs() < (v[0] - target).abs());
        assert!((v[2] - target).abs() < 2e-2 * target.abs(), "{th} {c}: {v:?} {target}");
    }
}

proptest! {
    #[test]
    fn solved_saddle_is_inside(th in -2.0f64..2.0, c in -4.0f64..4.0, t in 20.0f64..400.0) {
        let r = classify_case(th, c).unwrap();
        prop_assume!(matches!(r, Regime::ExplosiveRight | Regime::ExplosiveValley | Regime::StableRight | Regime::StableInner | Regime::UnstableRight));
        prop_assume!(c.abs() > 0.1 && (c - th).abs() > 0.1 && (c + th).abs() > 0.1 && (c - th / 3.0).abs() > 0.1);
        let s = solve_saddle(th, c, t).unwrap();
        prop_assert!(s.residual < 1e-12);
        prop_assert!(s.phi_at < 0.0);
        let th_used = if r == Regime::UnstableRight { 0.0 } else { th };
        prop_assert!((s.phi_at + (th_used * th_used + 2.0 * s.a_t * c).sqrt()).abs() < 1e-12 * s.phi_at.abs().max(1.0));
        prop_assert!(finite_t_domain(th_used, c, t).unwrap().contains(s.a_t));
    }
}
