//! Flag definitions. Every command doubles as the serialized run config.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "ou-sldp", version, about = "Tail probabilities of the OU drift MLE")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Regime and rate I(c).
    Rate(Point),
    /// Effective domain of the CGF, and the finite-horizon domain when --T is given.
    Domain(DomainArgs),
    /// Normalized CGF at a tilt, with its decomposition.
    Cgf(CgfArgs),
    /// Time-varying saddle point and its series.
    Saddle(Horizon),
    /// Sharp large-deviation approximation.
    Tail(TailArgs),
    /// Oracle value through characteristic-function inversion.
    Invert(InvertArgs),
    /// Monte Carlo estimate of the tail.
    Simulate(SimulateArgs),
    /// Expansion, oracle and tilted MC side by side.
    Validate(ValidateArgs),
    /// Sweep over a grid of (theta, c, T, method).
    Table(TableArgs),
    /// Re-run the config stored in a JSON report.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct Point {
    #[arg(long, allow_hyphen_values = true, value_parser = finite)]
    pub theta: f64,
    #[arg(long, allow_hyphen_values = true, value_parser = finite)]
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct Horizon {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: Point,
    #[arg(long = "T", allow_hyphen_values = true, value_parser = positive)]
    #[serde(rename = "T")]
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DomainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: Point,
    #[arg(long = "T", allow_hyphen_values = true, value_parser = positive)]
    #[serde(rename = "T")]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CgfArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub horizon: Horizon,
    /// Tilt parameter.
    #[arg(long, allow_hyphen_values = true, value_parser = finite)]
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TailArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub horizon: Horizon,
    #[arg(long, default_value_t = 0)]
    pub order: u32,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct InvertArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub horizon: Horizon,
    /// Truncation constant s in s_T = s·T^p.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMethod {
    Plain,
    /// Exact tilted law.
    Tilted,
    /// OU proposal with the tilted drift.
    Drift,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct McArgs {
    #[arg(long, default_value_t = 100_000, value_parser = at_least_two)]
    pub n_paths: usize,
    /// Grid steps per path; defaults to max(1000, 200·T).
    #[arg(long, value_parser = at_least_one)]
    pub n_steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub horizon: Horizon,
    #[command(flatten)]
    #[serde(flatten)]
    pub mc: McArgs,
    #[arg(long, value_enum, default_value_t = SimMethod::Tilted)]
    pub method: SimMethod,
    /// Also write one simulated path (seed --seed) as CSV.
    #[arg(long)]
    pub dump_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub horizon: Horizon,
    #[command(flatten)]
    #[serde(flatten)]
    pub mc: McArgs,
    /// Expansion order; capped at the highest order available.
    #[arg(long, default_value_t = 1)]
    pub order: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableMethod {
    Sldp,
    Oracle,
    Mc,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TableArgs {
    #[arg(long, required = true, value_delimiter = ',', allow_hyphen_values = true, value_parser = finite)]
    pub theta: Vec<f64>,
    #[arg(long, required = true, value_delimiter = ',', allow_hyphen_values = true, value_parser = finite)]
    pub c: Vec<f64>,
    #[arg(long = "T", required = true, value_delimiter = ',', allow_hyphen_values = true, value_parser = positive)]
    #[serde(rename = "T")]
    pub t: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "sldp,oracle")]
    pub method: Vec<TableMethod>,
    /// Expansion order; capped per regime.
    #[arg(long, default_value_t = 0)]
    pub order: u32,
    #[command(flatten)]
    #[serde(flatten)]
    pub mc: McArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// A JSON report written by this tool.
    #[arg(long)]
    pub input: PathBuf,
}

fn finite(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|e| format!("{e}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err("must be finite".into())
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let x = finite(s)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err("must be positive".into())
    }
}

fn at_least(s: &str, min: usize) -> Result<usize, String> {
    let n: usize = s.trim().parse().map_err(|e| format!("{e}"))?;
    if n >= min {
        Ok(n)
    } else {
        Err(format!("must be at least {min}"))
    }
}

fn at_least_one(s: &str) -> Result<usize, String> {
    at_least(s, 1)
}

fn at_least_two(s: &str) -> Result<usize, String> {
    at_least(s, 2)
}

/// Re-checks a config that did not come through the parser (replay).
/// Returns the offending flag and the reason.
pub fn check(cmd: &Command) -> Result<(), (&'static str, String)> {
    fn fin(flag: &'static str, x: f64) -> Result<(), (&'static str, String)> {
        finite(&x.to_string()).map(|_| ()).map_err(|e| (flag, e))
    }
    fn pos(flag: &'static str, x: f64) -> Result<(), (&'static str, String)> {
        positive(&x.to_string()).map(|_| ()).map_err(|e| (flag, e))
    }
    fn point(p: &Point) -> Result<(), (&'static str, String)> {
        fin("--theta", p.theta)?;
        fin("--c", p.c)
    }
    fn horizon(h: &Horizon) -> Result<(), (&'static str, String)> {
        point(&h.point)?;
        pos("--T", h.t)
    }
    fn mc(m: &McArgs) -> Result<(), (&'static str, String)> {
        if m.n_paths < 2 {
            return Err(("--n-paths", "must be at least 2".into()));
        }
        if m.n_steps == Some(0) {
            return Err(("--n-steps", "must be at least 1".into()));
        }
        Ok(())
    }
    match cmd {
        Command::Rate(p) => point(p),
        Command::Domain(d) => {
            point(&d.point)?;
            d.t.map_or(Ok(()), |t| pos("--T", t))
        }
        Command::Cgf(a) => {
            horizon(&a.horizon)?;
            fin("--a", a.a)
        }
        Command::Saddle(h) => horizon(h),
        Command::Tail(a) => horizon(&a.horizon),
        Command::Invert(a) => {
            horizon(&a.horizon)?;
            pos("--s", a.s)
        }
        Command::Simulate(a) => {
            horizon(&a.horizon)?;
            mc(&a.mc)
        }
        Command::Validate(a) => {
            horizon(&a.horizon)?;
            mc(&a.mc)
        }
        Command::Table(a) => {
            a.theta.iter().try_for_each(|&x| fin("--theta", x))?;
            a.c.iter().try_for_each(|&x| fin("--c", x))?;
            a.t.iter().try_for_each(|&x| pos("--T", x))?;
            mc(&a.mc)
        }
        Command::Replay(_) => Err(("--input", "a report cannot replay another replay".into())),
    }
}
