//! Exact-transition simulation of OU paths, the MLE, and plain or tilted
//! Monte Carlo estimates of the tail probabilities.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgf::{cgf_exact, cgf_parts, sigma_t_sq};
use crate::error::{finite, horizon, Error, Result};
use crate::model::Side;

/// Grid values of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub theta_used: f64,
}

impl Path {
    /// Writes `time,value` rows after a comment header.
    pub fn write_csv<W: Write>(&self, mut w: W, horizon: f64, seed: u64) -> io::Result<()> {
        writeln!(w, "# theta={:e} T={:e} seed={}", self.theta_used, horizon, seed)?;
        writeln!(w, "time,value")?;
        for (t, x) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t:.16e},{x:.16e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum McMethod {
    Plain,
    Tilted,
}

/// Importance-sampling proposal for [`tilted_mc_tail`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Proposal {
    /// The exponentially tilted law itself: `X_T` is Gaussian with variance
    /// `σ_T²(a)/D`, and the path is an OU(φ) bridge to it.
    Exact,
    /// OU with drift `φ(a)` and the Girsanov weight only.
    Drift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// `log(estimate)`; finite even when the estimate underflows.
    pub log_estimate: f64,
    pub n_paths: usize,
    pub method: McMethod,
    pub side: Side,
    pub tilt_a: Option<f64>,
    pub proposal_drift: Option<f64>,
    pub proposal: Option<Proposal>,
    /// Effective sample size `(Σw)²/Σw²` of the weights on the event.
    pub ess: Option<f64>,
    /// Mean of all importance weights, which should be close to 1.
    pub mean_weight: Option<f64>,
}

/// Default grid: `max(1000, 200·T)` steps.
pub fn default_steps(t: f64) -> usize {
    (200.0 * t).ceil().max(1000.0) as usize
}

/// `(e^{2θs} − 1)/(2θ)`, the OU transition variance over a step `s`.
fn ou_var(theta: f64, s: f64) -> f64 {
    sigma_t_sq(theta, s)
}

fn validate(theta: f64, t: f64, n_steps: usize) -> Result<()> {
    finite("theta", theta)?;
    horizon(t)?;
    if n_steps == 0 {
        return Err(Error::InvalidParameter {
            name: "n_steps",
            reason: "must be at least 1".into(),
        });
    }
    Ok(())
}

fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

/// Simulates one path with the exact Gaussian transitions
/// `X_{t+Δ} = e^{θΔ}X_t + N(0, (e^{2θΔ}−1)/(2θ))`.
pub fn simulate_path(theta: f64, t: f64, n_steps: usize, seed: u64) -> Result<Path> {
    validate(theta, t, n_steps)?;
    let mut rng = path_rng(seed, 0);
    let dt = t / n_steps as f64;
    let decay = (theta * dt).exp();
    let sd = ou_var(theta, dt).sqrt();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut x = 0.0;
    times.push(0.0);
    values.push(0.0);
    for i in 1..=n_steps {
        let z: f64 = rng.sample(StandardNormal);
        x = decay * x + sd * z;
        times.push(if i == n_steps { t } else { i as f64 * dt });
        values.push(x);
    }
    Ok(Path {
        times,
        values,
        theta_used: theta,
    })
}

fn trapezoid_sq(path: &Path) -> f64 {
    path.times
        .windows(2)
        .zip(path.values.windows(2))
        .map(|(t, x)| 0.5 * (t[1] - t[0]) * (x[0] * x[0] + x[1] * x[1]))
        .sum()
}

/// `θ̂_T = (X_T² − T)/(2∫X²)`, with the Itô identity for the numerator and
/// the trapezoid rule for the denominator.
pub fn mle_estimate(path: &Path) -> Result<f64> {
    let t = *path.times.last().unwrap_or(&0.0);
    let xt = *path.values.last().unwrap_or(&0.0);
    let integral = trapezoid_sq(path);
    if !(integral > 0.0) {
        return Err(Error::InvalidParameter {
            name: "path",
            reason: "∫X² must be positive".into(),
        });
    }
    Ok((xt * xt - t) / (2.0 * integral))
}

/// `Z_T(c) = (X_T² − T)/2 − c∫X²`.
pub fn z_statistic(path: &Path, c: f64) -> f64 {
    let t = *path.times.last().unwrap_or(&0.0);
    let xt = *path.values.last().unwrap_or(&0.0);
    0.5 * (xt * xt - t) - c * trapezoid_sq(path)
}

fn on_side(z: f64, side: Side) -> bool {
    match side {
        Side::UpperTail => z >= 0.0,
        Side::LowerTail => z <= 0.0,
    }
}

/// `(X_T, ∫X²)` of an OU(θ) path on a uniform grid, without storing it.
fn forward_functionals(theta: f64, t: f64, n_steps: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let dt = t / n_steps as f64;
    let decay = (theta * dt).exp();
    let sd = ou_var(theta, dt).sqrt();
    let mut x = 0.0f64;
    let mut acc = 0.0;
    for _ in 0..n_steps {
        let z: f64 = rng.sample(StandardNormal);
        let next = decay * x + sd * z;
        acc += x * x + next * next;
        x = next;
    }
    (x, 0.5 * dt * acc)
}

/// Bridge coefficients of an OU(φ) path pinned at `X_T`:
/// `x_{i+1} = p_i x_i + q_i x_T + s_i N`.
fn bridge_coeffs(phi: f64, t: f64, n_steps: usize) -> Vec<(f64, f64, f64)> {
    let dt = t / n_steps as f64;
    let v_dt = ou_var(phi, dt);
    let e_dt = (phi * dt).exp();
    (0..n_steps)
        .map(|i| {
            let rem_now = t - i as f64 * dt;
            let rem_next = (rem_now - dt).max(0.0);
            let v_now = ou_var(phi, rem_now);
            let v_next = ou_var(phi, rem_next);
            let e_next = (phi * rem_next).exp();
            let k = v_dt * e_next / v_now;
            let p = e_dt - k * (phi * rem_now).exp();
            let var = (v_dt * v_next / v_now).max(0.0);
            (p, k, var.sqrt())
        })
        .collect()
}

/// Log-space accumulator of importance weights.
#[derive(Debug, Clone, Copy)]
struct LogAcc {
    max: f64,
    s1: f64,
    s2: f64,
}

impl LogAcc {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            s1: 0.0,
            s2: 0.0,
        }
    }

    fn push(&mut self, lw: f64) {
        if lw == f64::NEG_INFINITY {
            return;
        }
        if lw > self.max {
            let r = (self.max - lw).exp();
            self.s1 *= r;
            self.s2 *= r * r;
            self.max = lw;
        }
        let e = (lw - self.max).exp();
        self.s1 += e;
        self.s2 += e * e;
    }

    fn merge(&mut self, o: &LogAcc) {
        if o.max == f64::NEG_INFINITY {
            return;
        }
        if self.max == f64::NEG_INFINITY {
            *self = *o;
            return;
        }
        let m = self.max.max(o.max);
        let (ra, rb) = ((self.max - m).exp(), (o.max - m).exp());
        self.s1 = self.s1 * ra + o.s1 * rb;
        self.s2 = self.s2 * ra * ra + o.s2 * rb * rb;
        self.max = m;
    }

    /// `(log mean, standard error, ess)` over `n` draws.
    fn summarize(&self, n: usize) -> (f64, f64, f64) {
        if self.max == f64::NEG_INFINITY {
            return (f64::NEG_INFINITY, 0.0, 0.0);
        }
        let nf = n as f64;
        let m1 = self.s1 / nf;
        let m2 = self.s2 / nf;
        let var = ((m2 - m1 * m1).max(0.0) / (nf - 1.0).max(1.0)).sqrt();
        (
            self.max + m1.ln(),
            var * self.max.exp(),
            self.s1 * self.s1 / self.s2,
        )
    }
}

const CHUNK: usize = 1024;

/// Runs `f(path_index, rng)` for every path in fixed-size chunks and merges
/// the chunk accumulators in index order, so results do not depend on the
/// thread count.
fn run_paths<F>(n_paths: usize, seed: u64, f: F) -> (LogAcc, LogAcc)
where
    F: Fn(&mut ChaCha8Rng) -> (f64, f64) + Sync,
{
    let chunks: Vec<(LogAcc, LogAcc)> = (0..n_paths.div_ceil(CHUNK))
        .into_par_iter()
        .map(|k| {
            let mut event = LogAcc::new();
            let mut all = LogAcc::new();
            for i in k * CHUNK..((k + 1) * CHUNK).min(n_paths) {
                let mut rng = path_rng(seed, i as u64);
                let (lw_event, lw_all) = f(&mut rng);
                event.push(lw_event);
                all.push(lw_all);
            }
            (event, all)
        })
        .collect();
    let mut event = LogAcc::new();
    let mut all = LogAcc::new();
    for (e, a) in &chunks {
        event.merge(e);
        all.merge(a);
    }
    (event, all)
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 2 {
        return Err(Error::InvalidParameter {
            name: "n_paths",
            reason: "must be at least 2".into(),
        });
    }
    Ok(())
}

/// Fraction of paths on the requested side of `Z_T(c) = 0`.
pub fn plain_mc_tail(
    theta: f64,
    c: f64,
    t: f64,
    side: Side,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    validate(theta, t, n_steps)?;
    finite("c", c)?;
    check_paths(n_paths)?;
    let (event, _) = run_paths(n_paths, seed, |rng| {
        let (xt, int) = forward_functionals(theta, t, n_steps, rng);
        let z = 0.5 * (xt * xt - t) - c * int;
        (if on_side(z, side) { 0.0 } else { f64::NEG_INFINITY }, 0.0)
    });
    let hits = if event.max == f64::NEG_INFINITY {
        0.0
    } else {
        event.s1
    };
    let p = hits / n_paths as f64;
    Ok(McEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / n_paths as f64).sqrt(),
        log_estimate: p.ln(),
        n_paths,
        method: McMethod::Plain,
        side,
        tilt_a: None,
        proposal_drift: None,
        proposal: None,
        ess: None,
        mean_weight: None,
    })
}

/// Importance-sampling estimate of the tail under the tilt `a`.
///
/// With [`Proposal::Exact`] the weight is `exp(T L_T(a) − aZ_T(c))`; with
/// [`Proposal::Drift`] it is the Girsanov factor
/// `exp(−(φ−θ)(X_T²−T)/2 + ½(φ²−θ²)∫X²)`. Falls back to plain sampling when
/// `|φ(a) − θ| < 1e−8`.
#[allow(clippy::too_many_arguments)]
pub fn tilted_mc_tail(
    theta: f64,
    c: f64,
    t: f64,
    a_tilt: f64,
    side: Side,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    proposal: Proposal,
) -> Result<McEstimate> {
    validate(theta, t, n_steps)?;
    finite("c", c)?;
    check_paths(n_paths)?;
    let parts = cgf_parts(theta, c, a_tilt)?;
    let phi = parts.phi;
    if (phi - theta).abs() < 1e-8 {
        return plain_mc_tail(theta, c, t, side, n_paths, n_steps, seed);
    }
    let (event, all) = match proposal {
        Proposal::Exact => {
            let log_a = t * cgf_exact(theta, c, a_tilt, t)?;
            let s2 = sigma_t_sq(phi, t);
            let d = 1.0 + parts.tau / (2.0 * phi) * -(2.0 * phi * t).exp_m1();
            let sd_end = (s2 / d).sqrt();
            let coeffs = bridge_coeffs(phi, t, n_steps);
            let dt = t / n_steps as f64;
            run_paths(n_paths, seed, |rng| {
                let end: f64 = rng.sample::<f64, _>(StandardNormal) * sd_end;
                let mut x = 0.0f64;
                let mut acc = 0.0;
                for &(p, q, s) in &coeffs {
                    let n: f64 = rng.sample(StandardNormal);
                    let next = p * x + q * end + s * n;
                    acc += x * x + next * next;
                    x = next;
                }
                let int = 0.5 * dt * acc;
                let z = 0.5 * (end * end - t) - c * int;
                let lw = log_a - a_tilt * z;
                (if on_side(z, side) { lw } else { f64::NEG_INFINITY }, lw)
            })
        }
        Proposal::Drift => run_paths(n_paths, seed, |rng| {
            let (xt, int) = forward_functionals(phi, t, n_steps, rng);
            let z = 0.5 * (xt * xt - t) - c * int;
            let lw = -(phi - theta) * 0.5 * (xt * xt - t) + 0.5 * (phi * phi - theta * theta) * int;
            (if on_side(z, side) { lw } else { f64::NEG_INFINITY }, lw)
        }),
    };
    let (log_est, se, ess) = event.summarize(n_paths);
    let (log_all, _, _) = all.summarize(n_paths);
    Ok(McEstimate {
        estimate: log_est.exp(),
        std_error: se,
        log_estimate: log_est,
        n_paths,
        method: McMethod::Tilted,
        side,
        tilt_a: Some(a_tilt),
        proposal_drift: Some(phi),
        proposal: Some(proposal),
        ess: Some(ess),
        mean_weight: Some(log_all.exp()),
    })
}

/// Samples `θ̂_T` over independent paths (deterministic in `seed`).
pub fn sample_mle(theta: f64, t: f64, n_paths: usize, n_steps: usize, seed: u64) -> Result<Vec<f64>> {
    validate(theta, t, n_steps)?;
    Ok((0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let (xt, int) = forward_functionals(theta, t, n_steps, &mut rng);
            (xt * xt - t) / (2.0 * int)
        })
        .collect())
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// One-sample Kolmogorov-Smirnov distance against a continuous CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Empirical quantile by linear interpolation.
pub fn quantile(sample: &[f64], p: f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum LimitLawReport {
    /// `√T(θ̂_T − θ)` against `N(0, −2θ)`.
    Stable {
        ks_distance: f64,
        sample_mean: f64,
        sample_sd: f64,
    },
    /// Quartiles of `e^{θT}(θ̂_T − θ)/(2θ)` against the standard Cauchy `±1`.
    Explosive { lower_quartile: f64, upper_quartile: f64 },
    /// Two-sample KS of `T·θ̂_T` against the same statistic at `T = 1`.
    Unstable {
        ks_statistic: f64,
        critical_value_1pct: f64,
        passes: bool,
    },
}

/// Checks the limit laws of the estimator on simulated paths.
pub fn limit_law_diagnostics(
    theta: f64,
    t: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<LimitLawReport> {
    check_paths(n_paths)?;
    let est = sample_mle(theta, t, n_paths, n_steps, seed)?;
    if theta < 0.0 {
        let norm: Vec<f64> = est.iter().map(|e| t.sqrt() * (e - theta)).collect();
        let sd = (-2.0 * theta).sqrt();
        let n = norm.len() as f64;
        let mean = norm.iter().sum::<f64>() / n;
        let var = norm.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        Ok(LimitLawReport::Stable {
            ks_distance: ks_distance(&norm, |x| normal_cdf(x / sd)),
            sample_mean: mean,
            sample_sd: var.sqrt(),
        })
    } else if theta > 0.0 {
        let scale = (theta * t).exp() / (2.0 * theta);
        let norm: Vec<f64> = est.iter().map(|e| scale * (e - theta)).collect();
        Ok(LimitLawReport::Explosive {
            lower_quartile: quantile(&norm, 0.25),
            upper_quartile: quantile(&norm, 0.75),
        })
    } else {
        let a: Vec<f64> = est.iter().map(|e| t * e).collect();
        let b = sample_mle(0.0, 1.0, n_paths, n_steps, seed ^ 0x9e37_79b9_7f4a_7c15)?;
        let d = ks_two_sample(&a, &b);
        let (n, m) = (a.len() as f64, b.len() as f64);
        let crit = 1.628 * ((n + m) / (n * m)).sqrt();
        Ok(LimitLawReport::Unstable {
            ks_statistic: d,
            critical_value_1pct: crit,
            passes: d <= crit,
        })
    }
}
