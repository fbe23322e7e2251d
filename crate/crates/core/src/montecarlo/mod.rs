//! Reproducible simulation of the random dynamics: orbits, itineraries and
//! occupation-time ensembles.

mod ensemble;
mod orbit;
mod rng;

pub use ensemble::{
    empirical_transitions, simulate_ensemble, simulate_ensemble_with, EnsembleOptions, EnsembleSummary, Normalization,
    TransitionCounts,
};
pub use orbit::{
    format_set, itinerary, orbit_exact, orbit_float, parse_set, sample_initial_exact, sample_initial_float, DensitySpec,
    FloatStepper, Indicator, TrajectoryRecord,
};
pub use rng::{CoinSource, ForcedCoins, Purpose, RandomCoins, Recording, RngBits, RngStream};

use crate::maps::{Interval, MapError, SystemKind};
use crate::partition::PartitionError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MonteCarloError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("exact orbit of {requested} steps exceeds the cap of {cap}")]
    ExactLengthCap { cap: usize, requested: usize },
    #[error("fixed-window backend cannot represent {0}")]
    FloatUnsupported(String),
    #[error("gave up after {0} breakpoint hits")]
    RetryLimit(u64),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("{0}")]
    Config(String),
}

/// The junction set used for occupation-time laws.
pub fn default_set(kind: SystemKind) -> Option<Vec<Interval>> {
    let d = |s: &str| s.parse().expect("constant");
    match kind {
        SystemKind::Hata | SystemKind::Mbgi => Some(vec![Interval { lo: d("1/4"), hi: d("3/4") }]),
        SystemKind::Pelikan => Some(vec![Interval { lo: d("1/2"), hi: d("1") }]),
        SystemKind::Custom => None,
    }
}
