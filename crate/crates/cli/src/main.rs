mod args;
mod output;
mod run;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde_json::Value;

use args::{Cli, Command, Format};
use run::Failure;

const THREADS_ENV: &str = "OU_SLDP_THREADS";

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::usage(THREADS_ENV, format!("expected a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::usage(THREADS_ENV, e.to_string()))
}

/// Loads the config stored in a report and checks it like parsed flags.
fn load_replay(path: &Path) -> Result<Command, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage("--input", format!("{}: {e}", path.display())))?;
    let report: Value =
        serde_json::from_str(&text).map_err(|e| Failure::usage("--input", format!("not JSON: {e}")))?;
    let config = report
        .get("config")
        .cloned()
        .ok_or_else(|| Failure::usage("--input", "report has no config"))?;
    let cmd: Command =
        serde_json::from_value(config).map_err(|e| Failure::usage("--input", format!("bad config: {e}")))?;
    args::check(&cmd).map_err(|(flag, msg)| Failure::usage(flag, msg))?;
    Ok(cmd)
}

fn emit(text: &str, output: Option<&Path>) -> std::io::Result<()> {
    match output {
        Some(p) => fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = cli.output.as_deref();

    let resolved = configure_threads().and_then(|_| match &cli.command {
        Command::Replay(r) => load_replay(&r.input),
        other => Ok(other.clone()),
    });
    let config = resolved
        .as_ref()
        .ok()
        .map(|c| serde_json::to_value(c).expect("config serializes"));

    let (text, code) = match resolved.and_then(|cmd| run::run(&cmd)) {
        Ok(report) => {
            let text = match cli.format {
                Format::Json => output::json_report(&report, config.as_ref().expect("config present")) + "\n",
                Format::Csv => output::csv_report(&report),
            };
            (text, 0)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            let text = match cli.format {
                Format::Json => output::json_failure(&f, config.as_ref()) + "\n",
                Format::Csv => output::csv_failure(&f),
            };
            (text, f.exit_code)
        }
    };
    if let Err(e) = emit(&text, output) {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(code as u8)
}
