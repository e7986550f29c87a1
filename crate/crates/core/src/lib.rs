//! Bernoulli autoregressive (BAR) processes.
//!
//! A BAR process is a Markov chain on `{0,1}^p` in which every node turns
//! on with a probability that is an affine function of its parents' current
//! bits (possibly inverted) plus a shared-rate Bernoulli noise term. This
//! crate simulates such chains, analyses small ones exactly, evaluates the
//! closed-form mixing and sample-complexity bounds, and recovers the signed
//! parent graph from a single trajectory.

pub mod bounds;
pub mod exactchain;
pub mod harness;
pub mod infer;
pub mod model;
pub mod rng;
pub mod simulate;

pub use exactchain::ExactChain;
pub use infer::{GraphEstimate, ObserverMode};
pub use model::{BarModel, GeneratorParams, GraphTruth, Sign};
pub use simulate::{Init, StateVector, Trajectory};
