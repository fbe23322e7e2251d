use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::orbit::{sample_initial_exact, sample_initial_float, CompiledIndicator, DensitySpec, FloatStepper, Indicator};
use super::rng::{CoinSource, RngStream};
use super::MonteCarloError;
use crate::maps::{MapError, RandomMapSystem};
use crate::numerics::float::LazyBits;
use crate::numerics::{Backend, DEFAULT_EXACT_ORBIT_CAP};
use crate::partition::{CellTag, PartitionScheme};

/// Scaling applied to an occupation count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// `count / N`
    #[serde(rename = "1/N")]
    PerStep,
    /// `count / √N`
    #[serde(rename = "1/sqrt(N)")]
    SqrtN,
}

impl Normalization {
    pub fn for_indicator(indicator: &Indicator) -> Self {
        match indicator {
            Indicator::AboveHalf => Normalization::PerStep,
            Indicator::InSet(_) => Normalization::SqrtN,
        }
    }

    pub fn apply(&self, count: u64, n: usize) -> f64 {
        match self {
            Normalization::PerStep => count as f64 / n as f64,
            Normalization::SqrtN => count as f64 / (n as f64).sqrt(),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::PerStep => "1/N",
            Normalization::SqrtN => "1/sqrt(N)",
        })
    }
}

/// Everything that determines an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOptions {
    /// Ascending step counts; one summary is produced per entry.
    pub checkpoints: Vec<usize>,
    pub trajectories: usize,
    pub seed: u64,
    pub indicator: Indicator,
    pub normalization: Normalization,
    pub backend: Backend,
    pub density: DensitySpec,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub exact_cap: usize,
}

impl EnsembleOptions {
    pub fn new(n: usize, m: usize, seed: u64, indicator: Indicator) -> Self {
        let normalization = Normalization::for_indicator(&indicator);
        Self {
            checkpoints: vec![n],
            trajectories: m,
            seed,
            indicator,
            normalization,
            backend: Backend::Float,
            density: DensitySpec::Uniform01,
            threads: None,
            exact_cap: DEFAULT_EXACT_ORBIT_CAP,
        }
    }
}

/// Normalized occupation samples of one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub system: String,
    pub n: usize,
    pub m: usize,
    pub indicator: Indicator,
    pub normalization: Normalization,
    pub seed: u64,
    pub backend: Backend,
    pub density: DensitySpec,
    /// Sample of stream `i` at index `i`.
    pub values: Vec<f64>,
    /// The same samples, ascending.
    pub sorted: Vec<f64>,
    pub breakpoint_hits: u64,
    pub precision_drops: u64,
}

struct Outcome {
    counts: Vec<u64>,
    breakpoint_hits: u64,
    precision_drops: u64,
}

const MAX_RETRIES: u64 = 1000;

fn run_exact(system: &RandomMapSystem, stream: RngStream, opts: &EnsembleOptions) -> Result<Outcome, MonteCarloError> {
    let n_max = *opts.checkpoints.last().expect("checked non-empty");
    if n_max > opts.exact_cap {
        return Err(MonteCarloError::ExactLengthCap { cap: opts.exact_cap, requested: n_max });
    }
    let mut coins = stream.coins(&system.p);
    let mut bits = stream.bits();
    let mut hits = 0u64;
    'attempt: loop {
        let mut x = sample_initial_exact(&mut bits, &opts.density);
        let mut counts = Vec::with_capacity(opts.checkpoints.len());
        let mut count = 0u64;
        let mut next_cp = 0;
        for step in 0..n_max {
            count += opts.indicator.contains(&x) as u64;
            if step + 1 == opts.checkpoints[next_cp] {
                counts.push(count);
                next_cp += 1;
            }
            let s = coins.next_symbol();
            match system.apply(s, &x) {
                Ok(y) => x = y,
                Err(MapError::BreakpointHit(_)) => {
                    hits += 1;
                    if hits > MAX_RETRIES {
                        return Err(MonteCarloError::RetryLimit(MAX_RETRIES));
                    }
                    continue 'attempt;
                }
                Err(e) => return Err(e.into()),
            }
        }
        return Ok(Outcome { counts, breakpoint_hits: hits, precision_drops: 0 });
    }
}

fn run_float(
    system: &RandomMapSystem,
    stepper: FloatStepper<'_>,
    indicator: &CompiledIndicator,
    stream: RngStream,
    opts: &EnsembleOptions,
) -> Result<Outcome, MonteCarloError> {
    let n_max = *opts.checkpoints.last().expect("checked non-empty");
    let mut coins = stream.coins(&system.p);
    let mut bits = LazyBits::new(stream.bits());
    let mut p = sample_initial_float(&mut bits, &opts.density)?;
    let mut counts = Vec::with_capacity(opts.checkpoints.len());
    let mut count = 0u64;
    let mut done = 0usize;
    for &cp in &opts.checkpoints {
        for _ in done..cp {
            count += indicator.contains(&p) as u64;
            let s = coins.next_symbol();
            stepper.step(&mut p, s, &mut bits);
        }
        done = cp;
        counts.push(count);
    }
    debug_assert_eq!(done, n_max);
    Ok(Outcome { counts, breakpoint_hits: 0, precision_drops: bits.precision_drops() })
}

fn validate(opts: &EnsembleOptions) -> Result<(), MonteCarloError> {
    if opts.trajectories == 0 {
        return Err(MonteCarloError::Config("need at least one trajectory".into()));
    }
    if opts.checkpoints.is_empty() || opts.checkpoints[0] == 0 || opts.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MonteCarloError::Config("step counts must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// One summary per checkpoint; trajectory `i` uses stream id `i`.
///
/// The result depends only on the options (not on `threads`): every
/// trajectory owns its streams and results are gathered in stream order.
pub fn simulate_ensemble_with(system: &RandomMapSystem, opts: &EnsembleOptions) -> Result<Vec<EnsembleSummary>, MonteCarloError> {
    validate(opts)?;
    let run = || -> Result<Vec<Outcome>, MonteCarloError> {
        match opts.backend {
            Backend::Exact => (0..opts.trajectories as u64)
                .into_par_iter()
                .map(|id| run_exact(system, RngStream::new(opts.seed, id), opts))
                .collect(),
            Backend::Float => {
                let stepper = FloatStepper::new(system)?;
                let compiled = opts.indicator.compile()?;
                (0..opts.trajectories as u64)
                    .into_par_iter()
                    .map(|id| run_float(system, stepper, &compiled, RngStream::new(opts.seed, id), opts))
                    .collect()
            }
        }
    };
    let outcomes = match opts.threads {
        None => run()?,
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| MonteCarloError::ThreadPool(e.to_string()))?
            .install(run)?,
    };
    let breakpoint_hits = outcomes.iter().map(|o| o.breakpoint_hits).sum();
    let precision_drops = outcomes.iter().map(|o| o.precision_drops).sum();
    Ok(opts
        .checkpoints
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let values: Vec<f64> = outcomes.iter().map(|o| opts.normalization.apply(o.counts[i], n)).collect();
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            EnsembleSummary {
                system: system.name.clone(),
                n,
                m: opts.trajectories,
                indicator: opts.indicator.clone(),
                normalization: opts.normalization,
                seed: opts.seed,
                backend: opts.backend,
                density: opts.density.clone(),
                values,
                sorted,
                breakpoint_hits,
                precision_drops,
            }
        })
        .collect())
}

/// `M` trajectories of `N` steps with the indicator's default normalization.
pub fn simulate_ensemble(
    system: &RandomMapSystem,
    n: usize,
    m: usize,
    seed: u64,
    indicator: Indicator,
    backend: Backend,
) -> Result<EnsembleSummary, MonteCarloError> {
    let mut opts = EnsembleOptions::new(n, m, seed, indicator);
    opts.backend = backend;
    Ok(simulate_ensemble_with(system, &opts)?.remove(0))
}

/// Consecutive tag pairs along one orbit.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TransitionCounts {
    pub total: u64,
    pub pairs: BTreeMap<(CellTag, CellTag), u64>,
    pub rows: BTreeMap<CellTag, u64>,
}

impl TransitionCounts {
    pub fn count(&self, s: CellTag, t: CellTag) -> u64 {
        self.pairs.get(&(s, t)).copied().unwrap_or(0)
    }

    pub fn row_total(&self, s: CellTag) -> u64 {
        self.rows.get(&s).copied().unwrap_or(0)
    }

    /// Observed targets of row `s` with their counts.
    pub fn row(&self, s: CellTag) -> Vec<(CellTag, u64)> {
        self.pairs.range((s, CellTag::Minus(0))..).take_while(|((a, _), _)| *a == s).map(|((_, t), c)| (*t, *c)).collect()
    }
}

/// Tag transitions along a single fixed-window orbit of `n` points
/// (stream 0, uniform start).
pub fn empirical_transitions(system: &RandomMapSystem, n: usize, seed: u64) -> Result<TransitionCounts, MonteCarloError> {
    let scheme = PartitionScheme::for_system(system)?;
    let stepper = FloatStepper::new(system)?;
    let stream = RngStream::new(seed, 0);
    let mut coins = stream.coins(&system.p);
    let mut bits = LazyBits::new(stream.bits());
    let mut p = sample_initial_float(&mut bits, &DensitySpec::Uniform01)?;
    let mut out = TransitionCounts::default();
    if n == 0 {
        return Ok(out);
    }
    let mut prev = scheme.locate_float(&p);
    for _ in 1..n {
        let s = coins.next_symbol();
        stepper.step(&mut p, s, &mut bits);
        let tag = scheme.locate_float(&p);
        *out.pairs.entry((prev, tag)).or_default() += 1;
        *out.rows.entry(prev).or_default() += 1;
        out.total += 1;
        prev = tag;
    }
    Ok(out)
}
