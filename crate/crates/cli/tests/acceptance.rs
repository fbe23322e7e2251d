//! One PASS/FAIL line per acceptance criterion at the stated tolerances.
//!
//! Criteria listed in `KNOWN_DISCREPANCIES` are run and reported like the
//! rest but do not fail the target; every other criterion must pass.

use std::path::Path;
use std::process::{Command, ExitCode};

use skewlaw_cli::verify::{run_criterion, CriterionOutcome};
use skewlaw_cli::{CliError, RunConfig};

const SEED: u64 = 1;

/// Runs a simulate config through the built binary, as a user would.
fn binary_runner(dir: &Path) -> impl Fn(&RunConfig, Option<usize>) -> Result<Vec<u8>, CliError> + '_ {
    move |config, threads| {
        let threads = threads.unwrap_or(1);
        let cfg = dir.join(format!("{}-{threads}.config.json", config.system));
        let out = dir.join(format!("{}-{threads}.csv", config.system));
        std::fs::write(&cfg, config.to_json())?;
        let status = Command::new(env!("CARGO_BIN_EXE_skewlaw"))
            .arg("--config")
            .arg(&cfg)
            .arg("--threads")
            .arg(threads.to_string())
            .arg("--out")
            .arg(&out)
            .stdout(std::process::Stdio::null())
            .status()?;
        if !status.success() {
            return Err(CliError::Compute(format!("skewlaw exited with {status}")));
        }
        Ok(std::fs::read(&out)?)
    }
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let runner = binary_runner(dir.path());
    let mut unexpected = Vec::new();
    for id in 1..=11u8 {
        let outcome: CriterionOutcome = match run_criterion(id, SEED, None, &runner) {
            Ok((outcome, _)) => outcome,
            Err(e) => {
                println!("criterion {id:>2} FAIL: error: {e}");
                unexpected.push(id);
                continue;
            }
        };
        println!("{}", outcome.line());
        match (outcome.pass, outcome.known_discrepancy) {
            (true, Some(_)) => println!("             (passes despite a recorded discrepancy)"),
            (false, Some(why)) => println!("             expected failure: {why}"),
            (false, None) => unexpected.push(id),
            (true, None) => {}
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all criteria without a recorded discrepancy pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures in criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
