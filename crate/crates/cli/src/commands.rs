use std::path::{Path, PathBuf};

use num_traits::{One, Zero};
use serde_json::{json, Value};
use skewlaw_core::chain::{
    chain_spec, cn, invariant_masses, set_measure_value, stationarity_residual, wandering_rates,
};
use skewlaw_core::maps::{RandomMapSystem, SystemKind};
use skewlaw_core::montecarlo::{
    sample_initial_exact, sample_initial_float, simulate_ensemble_with, CoinSource, EnsembleOptions, EnsembleSummary,
    FloatStepper, Indicator, RngStream,
};
use skewlaw_core::numerics::float::LazyBits;
use skewlaw_core::numerics::{rational_to_string, Backend, Rational};
use skewlaw_core::partition::PartitionScheme;
use skewlaw_core::stats::{ks_distance, LimitLaw};

use crate::config::{Command, RunConfig};
use crate::{verify, CliError};

/// Everything a command produces, before it touches the filesystem.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub config: RunConfig,
    /// CSV body, already prefixed with the config line.
    pub csv: Option<String>,
    /// Sidecar metadata, or the report for `verify`.
    pub json: Value,
    /// Human-readable summary lines.
    pub messages: Vec<String>,
    /// Outcome of any check the command performs.
    pub passed: bool,
}

impl Artifact {
    fn new(config: &RunConfig, csv: Option<String>, extra: Value, messages: Vec<String>, passed: bool) -> Self {
        let mut json = json!({ "config": config });
        if let (Value::Object(dst), Value::Object(src)) = (&mut json, extra) {
            dst.extend(src);
        }
        Artifact { config: config.clone(), csv, json, messages, passed }
    }
}

/// Run a command. `threads` only affects speed.
pub fn run(config: &RunConfig, threads: Option<usize>) -> Result<Artifact, CliError> {
    config.validate()?;
    match config.command {
        Command::Transition => transition(config),
        Command::Invariant => invariant(config),
        Command::Wander => wander(config),
        Command::Simulate => simulate(config, threads),
        Command::Orbit => orbit(config),
        Command::Verify => verify::run_verify(config, threads, &verify::in_process_runner),
    }
}

/// Write the CSV to `out` with its JSON sidecar at `<out>.json`; `verify`
/// writes its report to `out` itself. Without `out` the main artifact goes
/// to stdout.
pub fn write_artifact(artifact: &Artifact, out: Option<&Path>, threads: Option<usize>) -> Result<(), CliError> {
    let mut json = artifact.json.clone();
    if let Value::Object(map) = &mut json {
        map.insert(
            "execution".into(),
            json!({ "out": out.map(|p| p.display().to_string()), "threads": threads }),
        );
    }
    let json_text = serde_json::to_string_pretty(&json).expect("json serializes") + "\n";
    match (&artifact.csv, out) {
        (Some(csv), Some(path)) => {
            std::fs::write(path, csv)?;
            std::fs::write(sidecar_path(path), json_text)?;
        }
        (Some(csv), None) => print!("{csv}"),
        (None, Some(path)) => std::fs::write(path, json_text)?,
        (None, None) => print!("{json_text}"),
    }
    Ok(())
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

struct CsvOut {
    writer: csv::Writer<Vec<u8>>,
    header: String,
}

impl CsvOut {
    fn new(config: &RunConfig, columns: &[&str]) -> Result<Self, CliError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(columns)?;
        Ok(CsvOut { writer, header: config.csv_header_line() })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        Ok(self.writer.write_record(fields)?)
    }

    fn finish(self) -> Result<String, CliError> {
        let body = self.writer.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        Ok(self.header + &String::from_utf8(body).expect("csv is utf-8"))
    }
}

fn builtin_kind(system: &RandomMapSystem, what: &str) -> Result<SystemKind, CliError> {
    match system.kind {
        SystemKind::Custom => Err(CliError::Usage(format!("{what} needs a builtin system (hata, pelikan or mbgi)"))),
        kind => Ok(kind),
    }
}

fn num_den(q: &Rational) -> (String, String) {
    (q.numer().to_string(), q.denom().to_string())
}

fn transition(config: &RunConfig) -> Result<Artifact, CliError> {
    let system = config.load_system()?;
    builtin_kind(&system, "transition")?;
    let scheme = PartitionScheme::for_system(&system)?;
    let k = config.truncate;
    let mut csv = CsvOut::new(config, &["from", "to", "num", "den", "q", "kind", "tail_lead"])?;
    let mut stochastic = true;
    let mut rows = 0usize;
    for s in scheme.tags(k) {
        let row = scheme.transition_row(&system, s, k)?;
        let from = s.to_string();
        for (t, q) in &row.entries {
            let (n, d) = num_den(q);
            csv.row([from.as_str(), &t.to_string(), &n, &d, &rational_to_string(q), "entry", ""])?;
            rows += 1;
        }
        for tail in &row.tails {
            let total = tail.total();
            let (n, d) = num_den(&total);
            csv.row([from.as_str(), &tail.label(), &n, &d, &rational_to_string(&total), "tail", &rational_to_string(&tail.lead)])?;
            rows += 1;
        }
        let total = row.total();
        stochastic &= total.is_one();
        let (n, d) = num_den(&total);
        csv.row([from.as_str(), "sum", &n, &d, &rational_to_string(&total), "sum", ""])?;
    }
    let messages = vec![
        format!("{}: {rows} transition entries for indices <= {k}", system.name),
        format!("row sums: {}", if stochastic { "all 1/1" } else { "NOT all 1" }),
    ];
    let extra = json!({ "rows": rows, "stochastic": stochastic, "tail_ratio": "1/2" });
    Ok(Artifact::new(config, Some(csv.finish()?), extra, messages, stochastic))
}

fn invariant(config: &RunConfig) -> Result<Artifact, CliError> {
    let system = config.load_system()?;
    let kind = builtin_kind(&system, "invariant")?;
    let masses = invariant_masses(kind, config.truncate)?;
    let residuals = stationarity_residual(kind, config.truncate)?;
    let normalization = format!("×{}", masses.scale);
    let mut csv = CsvOut::new(config, &["tag", "num", "den", "mass", "normalization", "residual"])?;
    for ((tag, m), (rtag, r)) in masses.masses.iter().zip(&residuals) {
        debug_assert_eq!(tag, rtag);
        let (n, d) = num_den(m);
        csv.row([tag.to_string(), n, d, rational_to_string(m), normalization.clone(), r.to_string()])?;
    }
    let nonzero: Vec<String> = residuals.iter().filter(|(_, r)| !r.is_zero()).map(|(t, _)| t.to_string()).collect();
    let exact = nonzero.is_empty();
    let mut messages = vec![format!("{}: masses for indices <= {} {normalization} ({})", system.name, config.truncate, masses.note)];
    messages.push(if exact { "residual=0 exact".to_string() } else { format!("residual nonzero at {}", nonzero.join(", ")) });
    let extra = json!({
        "scale": masses.scale.to_string(),
        "scale_value": masses.scale.value(),
        "note": masses.note,
        "residual_exact_zero": exact,
    });
    Ok(Artifact::new(config, Some(csv.finish()?), extra, messages, exact))
}

fn wander(config: &RunConfig) -> Result<Artifact, CliError> {
    let system = config.load_system()?;
    let kind = builtin_kind(&system, "wander")?;
    if config.steps.contains(&1) {
        return Err(CliError::Usage("wander needs N >= 2".into()));
    }
    let rates = wandering_rates(kind, &config.steps)?;
    let mut csv = CsvOut::new(config, &["N", "w_N", "asymptote", "ratio", "abs_ratio_minus_1"])?;
    for r in &rates {
        csv.row([r.n.to_string(), r.w_n.to_string(), r.asymptote.to_string(), r.ratio.to_string(), (r.ratio - 1.0).abs().to_string()])?;
    }
    let c1 = cn(kind, 1)?;
    let monotone = rates.windows(2).all(|w| (w[1].ratio - 1.0).abs() < (w[0].ratio - 1.0).abs());
    let scale = chain_spec(kind)?.scale;
    let messages = vec![
        format!("{}: c_1 = {}", system.name, rational_to_string(&c1)),
        format!("|ratio - 1| strictly decreasing: {monotone}"),
    ];
    let extra = json!({ "c_1": rational_to_string(&c1), "scale": scale.to_string(), "monotone": monotone });
    Ok(Artifact::new(config, Some(csv.finish()?), extra, messages, true))
}

/// Ensemble options equivalent to a `simulate` config.
pub fn ensemble_options(config: &RunConfig, threads: Option<usize>) -> EnsembleOptions {
    let mut opts = EnsembleOptions::new(config.steps[0], config.trajectories, config.seed, config.indicator.clone());
    opts.checkpoints = config.steps.clone();
    opts.backend = config.backend;
    opts.density = config.density.clone();
    opts.threads = threads;
    opts
}

/// The limit law the samples are compared with, if one is known.
pub fn limit_law(system: &RandomMapSystem, indicator: &Indicator) -> Option<LimitLaw> {
    match indicator {
        Indicator::AboveHalf => Some(LimitLaw::Arcsine),
        Indicator::InSet(set) => {
            let mu_e = set_measure_value(system.kind, set).ok()?;
            Some(LimitLaw::ScaledHalfNormal { mu_e })
        }
    }
}

fn summary_json(s: &EnsembleSummary, law: Option<LimitLaw>) -> Result<Value, CliError> {
    let mean = s.values.iter().sum::<f64>() / s.m as f64;
    let ks = match law {
        Some(l) => Some(ks_distance(&s.sorted, |x| l.cdf(x)).map_err(|e| CliError::Compute(e.to_string()))?),
        None => None,
    };
    Ok(json!({
        "n": s.n,
        "m": s.m,
        "normalization": s.normalization,
        "mean": mean,
        "law": law.map(|l| l.name()),
        "ks": ks,
        "breakpoint_hits": s.breakpoint_hits,
        "precision_drops": s.precision_drops,
    }))
}

fn simulate(config: &RunConfig, threads: Option<usize>) -> Result<Artifact, CliError> {
    let system = config.load_system()?;
    let summaries = simulate_ensemble_with(&system, &ensemble_options(config, threads))?;
    let law = limit_law(&system, &config.indicator);
    let mut csv = CsvOut::new(config, &["trajectory", "n", "value"])?;
    let mut checkpoints = Vec::new();
    let mut messages = Vec::new();
    for s in &summaries {
        for (i, v) in s.values.iter().enumerate() {
            csv.row([i.to_string(), s.n.to_string(), v.to_string()])?;
        }
        let j = summary_json(s, law)?;
        messages.push(format!(
            "{} N={} M={}: mean={:.4} ks={} breakpoint_hits={} precision_drops={}",
            system.name,
            s.n,
            s.m,
            j["mean"].as_f64().unwrap_or(f64::NAN),
            j["ks"].as_f64().map_or("n/a".to_string(), |k| format!("{k:.4}")),
            s.breakpoint_hits,
            s.precision_drops
        ));
        checkpoints.push(j);
    }
    Ok(Artifact::new(config, Some(csv.finish()?), json!({ "checkpoints": checkpoints }), messages, true))
}

fn orbit(config: &RunConfig) -> Result<Artifact, CliError> {
    let system = config.load_system()?;
    let scheme = PartitionScheme::for_system(&system).ok();
    let n = *config.steps.last().expect("validated");
    let stream = RngStream::new(config.seed, 0);
    let mut coins = stream.coins(&system.p);
    let mut csv = CsvOut::new(config, &["step", "x", "x_f64", "tag", "symbol"])?;
    let mut hit = None;
    match config.backend {
        Backend::Exact => {
            if n > skewlaw_core::numerics::DEFAULT_EXACT_ORBIT_CAP {
                return Err(CliError::Usage(format!(
                    "exact orbits are capped at {} steps",
                    skewlaw_core::numerics::DEFAULT_EXACT_ORBIT_CAP
                )));
            }
            let mut x = sample_initial_exact(&mut stream.bits(), &config.density);
            for step in 0..n {
                let tag = scheme.as_ref().map(|sc| sc.locate(&x)).transpose()?.map(|t| t.to_string()).unwrap_or_default();
                let s = coins.next_symbol();
                csv.row([step.to_string(), x.to_string(), x.to_f64().to_string(), tag, s.to_string()])?;
                match system.apply(s, &x) {
                    Ok(y) => x = y,
                    Err(e) => {
                        hit = Some(e.to_string());
                        break;
                    }
                }
            }
        }
        Backend::Float => {
            let stepper = FloatStepper::new(&system)?;
            let mut bits = LazyBits::new(stream.bits());
            let mut p = sample_initial_float(&mut bits, &config.density)?;
            for step in 0..n {
                let tag = scheme.as_ref().map(|sc| sc.locate_float(&p).to_string()).unwrap_or_default();
                let s = coins.next_symbol();
                csv.row([step.to_string(), p.revealed().to_string(), p.to_f64().to_string(), tag, s.to_string()])?;
                stepper.step(&mut p, s, &mut bits);
            }
        }
    }
    let mut messages = vec![format!("{}: orbit of {n} steps ({} backend)", system.name, config.backend)];
    if let Some(e) = &hit {
        messages.push(format!("stopped early: {e}"));
    }
    let extra = json!({ "stream": 0, "stopped": hit });
    Ok(Artifact::new(config, Some(csv.finish()?), extra, messages, true))
}
