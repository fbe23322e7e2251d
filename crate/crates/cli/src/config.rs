use serde::{Deserialize, Serialize};
use skewlaw_core::maps::{builtin, RandomMapSystem};
use skewlaw_core::montecarlo::{DensitySpec, Indicator};
use skewlaw_core::numerics::Backend;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Transition,
    Invariant,
    Wander,
    Simulate,
    Verify,
    Orbit,
}

/// Which acceptance criteria `verify` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    /// Criteria 1-7: exact tables, chain identities, orbit conjugacy.
    Exact,
    /// Criteria 8-10: Monte Carlo distributional checks.
    Laws,
    /// Criterion 11.
    Determinism,
}

impl Suite {
    pub fn includes(&self, criterion: u8) -> bool {
        match self {
            Suite::All => true,
            Suite::Exact => (1..=7).contains(&criterion),
            Suite::Laws => (8..=10).contains(&criterion),
            Suite::Determinism => criterion == 11,
        }
    }
}

/// Every parameter that determines an artifact's content.
///
/// Output path and thread count are deliberately absent: neither changes the
/// bytes produced, and artifacts from different placements must compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Builtin name or path of a JSON system description.
    pub system: String,
    pub backend: Backend,
    pub seed: u64,
    /// `N`; a list for `wander` and for checkpointed `simulate` runs.
    pub steps: Vec<usize>,
    /// `M`
    pub trajectories: usize,
    /// `K`
    pub truncate: u32,
    pub indicator: Indicator,
    pub density: DensitySpec,
    pub suite: Suite,
}

const CONFIG_PREFIX: &str = "# config=";

impl RunConfig {
    pub fn new(command: Command) -> Self {
        let steps = match command {
            Command::Wander => vec![100, 1_000, 10_000],
            Command::Orbit => vec![100],
            _ => vec![10_000],
        };
        Self {
            command,
            system: "hata".into(),
            backend: Backend::Float,
            seed: 1,
            steps,
            trajectories: 1000,
            truncate: 12,
            indicator: Indicator::AboveHalf,
            density: DensitySpec::Uniform01,
            suite: Suite::All,
        }
    }

    pub fn load_system(&self) -> Result<RandomMapSystem, CliError> {
        if self.system.ends_with(".json") {
            let text = std::fs::read_to_string(&self.system)?;
            return Ok(RandomMapSystem::from_json(&text)?);
        }
        Ok(builtin(&self.system)?)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.steps.is_empty() || self.steps.contains(&0) {
            return Err(CliError::Usage("--steps needs positive step counts".into()));
        }
        if self.command == Command::Simulate && self.trajectories == 0 {
            return Err(CliError::Usage("--trajectories must be positive".into()));
        }
        if matches!(self.command, Command::Simulate | Command::Orbit) && self.steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Usage("--steps must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// The comment line that opens every CSV artifact.
    pub fn csv_header_line(&self) -> String {
        format!("{CONFIG_PREFIX}{}\n", self.to_json())
    }

    /// Recover the config from a CSV artifact, a JSON sidecar or report, or a
    /// bare config file.
    pub fn from_artifact(text: &str) -> Result<Self, CliError> {
        let bad = |e: serde_json::Error| CliError::Usage(format!("unreadable config: {e}"));
        if let Some(rest) = text.strip_prefix(CONFIG_PREFIX) {
            let line = rest.lines().next().unwrap_or("");
            return serde_json::from_str(line).map_err(bad);
        }
        let value: serde_json::Value = serde_json::from_str(text).map_err(bad)?;
        match value.get("config") {
            Some(inner) => serde_json::from_value(inner.clone()).map_err(bad),
            None => serde_json::from_value(value).map_err(bad),
        }
    }
}

/// Parse a `--steps` list such as `100,1000,10000` or `1e4`.
pub fn parse_steps(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|part| {
            let part = part.trim();
            let bad = || CliError::Usage(format!("bad step count {part:?}"));
            if let Some((m, e)) = part.split_once(['e', 'E']) {
                let m: usize = m.parse().map_err(|_| bad())?;
                let e: u32 = e.parse().map_err(|_| bad())?;
                10usize.checked_pow(e).and_then(|p| p.checked_mul(m)).ok_or_else(bad)
            } else {
                part.parse().map_err(|_| bad())
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_text() {
        assert_eq!(parse_steps("100,1e3, 2e4").unwrap(), vec![100, 1000, 20000]);
        assert!(parse_steps("ten").is_err());
        assert!(parse_steps("1e40").is_err());
    }

    #[test]
    fn config_roundtrips_through_artifacts() {
        let mut cfg = RunConfig::new(Command::Simulate);
        cfg.indicator = "in-set(1/4,3/4)".parse().unwrap();
        let csv = format!("{}trajectory,n,value\n", cfg.csv_header_line());
        assert_eq!(RunConfig::from_artifact(&csv).unwrap(), cfg);
        let sidecar = serde_json::json!({ "config": cfg, "other": 1 }).to_string();
        assert_eq!(RunConfig::from_artifact(&sidecar).unwrap(), cfg);
        assert_eq!(RunConfig::from_artifact(&cfg.to_json()).unwrap(), cfg);
        assert!(matches!(RunConfig::from_artifact("{\"command\":\"nope\"}"), Err(CliError::Usage(_))));
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::new(Command::Simulate);
        assert!(cfg.validate().is_ok());
        cfg.steps = vec![100, 10];
        assert!(cfg.validate().is_err());
        cfg.steps = vec![];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn suites() {
        assert!(Suite::Exact.includes(7) && !Suite::Exact.includes(8));
        assert!(Suite::Laws.includes(10) && !Suite::Laws.includes(11));
        assert!(Suite::All.includes(11) && Suite::Determinism.includes(11));
    }
}
