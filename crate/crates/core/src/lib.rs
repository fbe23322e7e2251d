//! Random piecewise-linear interval maps with an indifferent-in-average
//! fixed point, their exact countable Markov chains, and Monte Carlo
//! occupation-time statistics.

pub mod chain;
pub mod maps;
pub mod montecarlo;
pub mod numerics;
pub mod partition;
pub mod stats;

pub use maps::{builtin, Branch, Interval, MapError, PiecewiseLinearMap, RandomMapSystem, Symbol, SystemKind};
pub use numerics::{Backend, Dyadic, Rational, Slope};
