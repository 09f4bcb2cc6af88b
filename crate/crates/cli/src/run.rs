//! Dispatch from a parsed command to the library, producing a report.

use std::fs::File;
use std::io::BufWriter;

use ou_sldp::cgf::{cgf_derivatives, cgf_exact, cgf_parts, decompose};
use ou_sldp::mc::{default_steps, plain_mc_tail, simulate_path, tilted_mc_tail, McEstimate, Proposal};
use ou_sldp::oracle::{oracle_tail_with, tilt_plan, InversionResult, OracleOptions};
use ou_sldp::saddle::{series_coeffs, solve_saddle};
use ou_sldp::sldp::{max_order, tail_probability, TailApproximation};
use ou_sldp::{classify_case, effective_domain, finite_t_domain, rate_function, Error, Regime};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::args::{
    CgfArgs, Command, DomainArgs, Horizon, InvertArgs, McArgs, Point, SimMethod, SimulateArgs,
    TableArgs, TableMethod, TailArgs, ValidateArgs,
};

/// One plottable line: a tail value for `(θ, c, T, method)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub theta: f64,
    pub c: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub method: String,
    pub regime: Option<Regime>,
    pub rate: Option<f64>,
    pub probability: Option<f64>,
    pub log_probability: Option<f64>,
    pub error_estimate: Option<f64>,
    pub error: Option<String>,
}

pub struct Report {
    /// Command-specific fields; `regime` and `rate` come first when present.
    pub fields: Map<String, Value>,
    /// Row view used by the CSV writer for probability-valued commands.
    pub rows: Option<Vec<Row>>,
}

/// A failed run: exit status plus machine-readable reason.
#[derive(Debug)]
pub struct Failure {
    pub exit_code: i32,
    pub reason: String,
    pub message: String,
    pub regime: Option<Regime>,
}

impl Failure {
    pub fn usage(flag: &str, message: impl Into<String>) -> Self {
        Self {
            exit_code: 2,
            reason: "usage".into(),
            message: format!("{flag}: {}", message.into()),
            regime: None,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let exit_code = match e {
            Error::NonFinite { .. } | Error::InvalidParameter { .. } => 2,
            _ => 1,
        };
        let regime = match &e {
            Error::NoExpansion { regime }
            | Error::NoSeries { regime }
            | Error::OrderUnavailable { regime, .. } => Some(*regime),
            _ => None,
        };
        Self {
            exit_code,
            reason: e.reason().into(),
            message: e.to_string(),
            regime,
        }
    }
}

type Outcome = Result<Report, Failure>;

fn to_map<T: Serialize>(v: &T) -> Map<String, Value> {
    match serde_json::to_value(v).expect("report types serialize") {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    }
}

/// `regime` and `rate` first, then `rest` without duplicating them.
fn head(regime: Regime, rate: Option<f64>, rest: Map<String, Value>) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("regime".into(), json!(regime));
    m.insert("rate".into(), json!(rate));
    for (k, v) in rest {
        if k != "regime" && k != "rate" {
            m.insert(k, v);
        }
    }
    m
}

fn single(fields: Map<String, Value>) -> Report {
    Report { fields, rows: None }
}

fn steps(mc: &McArgs, t: f64) -> usize {
    mc.n_steps.unwrap_or_else(|| default_steps(t))
}

pub fn run(cmd: &Command) -> Outcome {
    match cmd {
        Command::Rate(p) => rate(p),
        Command::Domain(a) => domain(a),
        Command::Cgf(a) => cgf(a),
        Command::Saddle(h) => saddle(h),
        Command::Tail(a) => tail(a),
        Command::Invert(a) => invert(a),
        Command::Simulate(a) => simulate(a),
        Command::Validate(a) => validate(a),
        Command::Table(a) => table(a),
        Command::Replay(_) => Err(Failure::usage("--input", "nested replay")),
    }
}

fn rate(p: &Point) -> Outcome {
    let regime = classify_case(p.theta, p.c)?;
    let rate = rate_function(p.theta, p.c)?;
    Ok(single(head(regime, Some(rate), Map::new())))
}

fn domain(a: &DomainArgs) -> Outcome {
    let (theta, c) = (a.point.theta, a.point.c);
    let regime = classify_case(theta, c)?;
    let mut m = Map::new();
    m.insert("effective_domain".into(), json!(effective_domain(theta, c)?));
    if let Some(t) = a.t {
        m.insert("finite_t_domain".into(), json!(finite_t_domain(theta, c, t)?));
    }
    Ok(single(head(regime, Some(rate_function(theta, c)?), m)))
}

fn cgf(a: &CgfArgs) -> Outcome {
    let (theta, c, t) = (a.horizon.point.theta, a.horizon.point.c, a.horizon.t);
    let regime = classify_case(theta, c)?;
    let value = cgf_exact(theta, c, a.a, t)?;
    let mut m = Map::new();
    m.insert("a".into(), json!(a.a));
    m.insert("cgf".into(), json!(value));
    m.insert("parts".into(), json!(cgf_parts(theta, c, a.a)?));
    // Both need a ∈ Δ_c; outside it (but inside the finite-T domain) they are absent.
    m.insert("decomposition".into(), json!(decompose(theta, c, a.a, t).ok()));
    m.insert("derivatives".into(), json!(cgf_derivatives(theta, c, a.a).ok()));
    Ok(single(head(regime, Some(rate_function(theta, c)?), m)))
}

fn saddle(h: &Horizon) -> Outcome {
    let (theta, c, t) = (h.point.theta, h.point.c, h.t);
    let regime = classify_case(theta, c)?;
    let sol = solve_saddle(theta, c, t)?;
    let series = series_coeffs(theta, c)?;
    let mut m = to_map(&sol);
    m.insert("series".into(), json!(series));
    m.insert("series_a_t".into(), json!(series.a_at(t, series.a_coeffs.len())));
    Ok(single(head(regime, Some(rate_function(theta, c)?), m)))
}

fn sldp_row(theta: f64, c: f64, t: f64, r: &TailApproximation) -> Row {
    Row {
        theta,
        c,
        t,
        method: "sldp".into(),
        regime: Some(r.regime),
        rate: Some(r.rate),
        probability: Some(r.probability),
        log_probability: Some(r.log_probability),
        error_estimate: r.error_estimate,
        error: None,
    }
}

fn oracle_row(theta: f64, c: f64, t: f64, rate: f64, r: &InversionResult) -> Row {
    Row {
        theta,
        c,
        t,
        method: "oracle".into(),
        regime: Some(r.regime),
        rate: Some(rate),
        probability: Some(r.probability),
        log_probability: Some(r.log_probability),
        error_estimate: Some(r.quadrature_error),
        error: None,
    }
}

fn mc_row(theta: f64, c: f64, t: f64, regime: Regime, rate: f64, method: &str, e: &McEstimate) -> Row {
    Row {
        theta,
        c,
        t,
        method: method.into(),
        regime: Some(regime),
        rate: Some(rate),
        probability: Some(e.estimate),
        log_probability: Some(e.log_estimate),
        error_estimate: Some(e.std_error),
        error: None,
    }
}

fn tail(a: &TailArgs) -> Outcome {
    let (theta, c, t) = (a.horizon.point.theta, a.horizon.point.c, a.horizon.t);
    let r = tail_probability(theta, c, t, a.order)?;
    let row = sldp_row(theta, c, t, &r);
    Ok(Report {
        fields: head(r.regime, Some(r.rate), to_map(&r)),
        rows: Some(vec![row]),
    })
}

fn oracle_opts(s: f64) -> OracleOptions {
    OracleOptions {
        s,
        ..Default::default()
    }
}

fn invert(a: &InvertArgs) -> Outcome {
    let (theta, c, t) = (a.horizon.point.theta, a.horizon.point.c, a.horizon.t);
    let r = oracle_tail_with(theta, c, t, &oracle_opts(a.s))?;
    let rate = rate_function(theta, c)?;
    let row = oracle_row(theta, c, t, rate, &r);
    Ok(Report {
        fields: head(r.regime, Some(rate), to_map(&r)),
        rows: Some(vec![row]),
    })
}

/// Monte Carlo on the regime's side. Tilted methods fall back to plain
/// sampling at `c = 0`, where there is no tilt.
fn monte_carlo(theta: f64, c: f64, t: f64, mc: &McArgs, method: SimMethod) -> Result<(Regime, McEstimate), Failure> {
    let regime = classify_case(theta, c)?;
    let side = regime.side().ok_or(Error::NoExpansion { regime })?;
    let n_steps = steps(mc, t);
    let proposal = match method {
        SimMethod::Plain => None,
        SimMethod::Tilted => Some(Proposal::Exact),
        SimMethod::Drift => Some(Proposal::Drift),
    };
    let est = match proposal {
        Some(p) if !regime.is_zero_threshold() => {
            let plan = tilt_plan(theta, c, t)?;
            tilted_mc_tail(theta, c, t, plan.alpha, side, mc.n_paths, n_steps, mc.seed, p)?
        }
        _ => plain_mc_tail(theta, c, t, side, mc.n_paths, n_steps, mc.seed)?,
    };
    Ok((regime, est))
}

fn method_name(m: SimMethod) -> &'static str {
    match m {
        SimMethod::Plain => "plain",
        SimMethod::Tilted => "tilted",
        SimMethod::Drift => "drift",
    }
}

fn simulate(a: &SimulateArgs) -> Outcome {
    let (theta, c, t) = (a.horizon.point.theta, a.horizon.point.c, a.horizon.t);
    let (regime, est) = monte_carlo(theta, c, t, &a.mc, a.method)?;
    let rate = rate_function(theta, c)?;
    if let Some(path) = &a.dump_path {
        let p = simulate_path(theta, t, steps(&a.mc, t), a.mc.seed)?;
        let f = File::create(path).map_err(|e| Failure {
            exit_code: 1,
            reason: "io".into(),
            message: format!("{}: {e}", path.display()),
            regime: None,
        })?;
        p.write_csv(BufWriter::new(f), t, a.mc.seed).map_err(|e| Failure {
            exit_code: 1,
            reason: "io".into(),
            message: e.to_string(),
            regime: None,
        })?;
    }
    let mut m = to_map(&est);
    m.insert("n_steps".into(), json!(steps(&a.mc, t)));
    let row = mc_row(theta, c, t, regime, rate, method_name(a.method), &est);
    Ok(Report {
        fields: head(regime, Some(rate), m),
        rows: Some(vec![row]),
    })
}

fn validate(a: &ValidateArgs) -> Outcome {
    let (theta, c, t) = (a.horizon.point.theta, a.horizon.point.c, a.horizon.t);
    let regime = classify_case(theta, c)?;
    let max = max_order(regime).ok_or(Error::NoExpansion { regime })?;
    let order = a.order.min(max);
    let rate = rate_function(theta, c)?;
    let s = tail_probability(theta, c, t, order)?;
    let o = oracle_tail_with(theta, c, t, &OracleOptions::default())?;
    let (_, e) = monte_carlo(theta, c, t, &a.mc, SimMethod::Tilted)?;
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
    let mut m = Map::new();
    m.insert("order".into(), json!(order));
    m.insert("sldp".into(), json!(s));
    m.insert("oracle".into(), json!(o));
    m.insert("mc".into(), json!(e));
    m.insert(
        "gaps".into(),
        json!({
            "sldp_vs_oracle_rel": rel(s.probability, o.probability),
            "sldp_vs_mc_rel": rel(s.probability, e.estimate),
            "oracle_vs_mc_rel": rel(o.probability, e.estimate),
            "oracle_vs_mc_se": (e.estimate - o.probability) / e.std_error,
        }),
    );
    let rows = vec![
        sldp_row(theta, c, t, &s),
        oracle_row(theta, c, t, rate, &o),
        mc_row(theta, c, t, regime, rate, "mc", &e),
    ];
    Ok(Report {
        fields: head(regime, Some(rate), m),
        rows: Some(rows),
    })
}

fn table_row(theta: f64, c: f64, t: f64, method: TableMethod, a: &TableArgs) -> Row {
    let name = match method {
        TableMethod::Sldp => "sldp",
        TableMethod::Oracle => "oracle",
        TableMethod::Mc => "mc",
    };
    let attempt = || -> Result<Row, Failure> {
        let regime = classify_case(theta, c)?;
        let rate = rate_function(theta, c)?;
        match method {
            TableMethod::Sldp => {
                let max = max_order(regime).ok_or(Error::NoExpansion { regime })?;
                Ok(sldp_row(theta, c, t, &tail_probability(theta, c, t, a.order.min(max))?))
            }
            TableMethod::Oracle => {
                let o = oracle_tail_with(theta, c, t, &OracleOptions::default())?;
                Ok(oracle_row(theta, c, t, rate, &o))
            }
            TableMethod::Mc => {
                let (_, e) = monte_carlo(theta, c, t, &a.mc, SimMethod::Tilted)?;
                Ok(mc_row(theta, c, t, regime, rate, name, &e))
            }
        }
    };
    attempt().unwrap_or_else(|f| Row {
        theta,
        c,
        t,
        method: name.into(),
        regime: f.regime.or_else(|| classify_case(theta, c).ok()),
        rate: rate_function(theta, c).ok(),
        probability: None,
        log_probability: None,
        error_estimate: None,
        error: Some(f.reason),
    })
}

fn table(a: &TableArgs) -> Outcome {
    let mut rows = Vec::new();
    for &theta in &a.theta {
        for &c in &a.c {
            for &t in &a.t {
                for &m in &a.method {
                    rows.push(table_row(theta, c, t, m, a));
                }
            }
        }
    }
    let mut m = Map::new();
    m.insert("rows".into(), json!(rows));
    Ok(Report {
        fields: m,
        rows: Some(rows),
    })
}
