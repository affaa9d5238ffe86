//! Stochastic sequences `a_n = b_1 + ... + b_n` with iid increments, the
//! exponential averages that decide their ergodic behavior, concentration
//! bounds for dependent families, and stochastic rank-one towers.

pub mod averages;
pub mod concentration;
pub mod distributions;
pub mod error;
pub mod forms;
pub mod phase;
pub mod rng;
pub mod sequences;
pub mod tower;

pub use distributions::{DistSpec, IncrementDistribution};
pub use error::{Error, Result};
pub use forms::LinearForm;
pub use phase::Phase;
pub use sequences::{DynamicalSequence, StochasticSequence};
pub use tower::{build_tower, BuildOptions, CutRule, LevelSet, SpacerPlan, Tower};
