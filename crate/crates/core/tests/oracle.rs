use ou_sldp::oracle::{b_t_parseval, oracle_tail, oracle_tail_with, tilt_plan, OracleOptions};
use ou_sldp::sldp::zero_threshold_exact;

const CASES: [(f64, f64); 6] = [(-1.0, -2.0), (-1.0, -0.6), (-1.0, 0.5), (1.0, 2.0), (1.0, 0.5), (1.0, -1.0)];

#[test]
fn invariant_under_doubling_truncation_and_tolerance() {
    for &(th, c) in &CASES {
        let t = 10.0;
        let base = oracle_tail(th, c, t).unwrap();
        let doubled = oracle_tail_with(th, c, t, &OracleOptions { s: 2.0, ..Default::default() }).unwrap();
        let tighter = oracle_tail_with(th, c, t, &OracleOptions { rel_tol: 5e-11, ..Default::default() }).unwrap();
        for other in [doubled, tighter] {
            let rel = (other.probability - base.probability).abs() / base.probability;
            assert!(rel < 1e-8, "{th} {c}: {rel:e}");
        }
    }
}

#[test]
fn truncation_rule_growth() {
    // min(T s_T²/β², T√s_T/√|β|) ≥ T^{1/3}·const for s_T = T^p.
    for &(th, c) in &CASES {
        let mut prev = 0.0;
        for &t in &[10.0, 40.0, 160.0, 640.0] {
            let p = tilt_plan(th, c, t).unwrap();
            let s_t = t.powf(p.s_power);
            let b = p.beta.abs();
            let m = (t * s_t * s_t / (b * b)).min(t * s_t.sqrt() / b.sqrt());
            let r = m / t.powf(1.0 / 3.0);
            assert!(r > 0.0 && r >= 0.9 * prev, "{th} {c} {t}: {r}");
            prev = r;
        }
    }
}

#[test]
fn tail_bound_decays_exponentially() {
    for &(th, c) in &[(1.0, 2.0), (-1.0, -2.0), (1.0, 0.5)] {
        let ts = [10.0, 20.0, 40.0, 80.0];
        let mut pts = Vec::new();
        for &t in &ts {
            let p = tilt_plan(th, c, t).unwrap();
            let r = b_t_parseval(th, c, t, p.alpha, p.beta, 3.0 * t.powf(p.s_power)).unwrap();
            pts.push((t.powf(1.0 / 3.0), r.d_bound.ln()));
        }
        // log d_bound ≈ const − D·T^ν with D > 0.
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!(slope < 0.0, "{th} {c}: {pts:?}");
    }
}

#[test]
fn zero_threshold_route_matches_exact() {
    for &t in &[5.0, 10.0, 20.0] {
        let o = oracle_tail(1.0, 0.0, t).unwrap();
        let s = zero_threshold_exact(1.0, t, 20).unwrap();
        assert!((o.probability - s.probability).abs() <= 1e-10 * o.probability, "{t}");
    }
}

#[test]
fn frozen_values() {
    // Oracle values reproduced by an independent quadrature prototype.
    for &(th, c, t, p) in &[
        (1.0, 0.5, 10.0, 2.775537e-4),
        (1.0, -1.0, 10.0, 4.359954e-5),
        (1.0, 2.0, 10.0, 3.785832e-14),
        (-1.0, -2.0, 10.0, 8.268609e-2),
    ] {
        let o = oracle_tail(th, c, t).unwrap();
        assert!((o.probability / p - 1.0).abs() < 2e-6, "{th} {c}: {}", o.probability);
        assert!(o.quadrature_error < 1e-6 * o.probability);
    }
}
