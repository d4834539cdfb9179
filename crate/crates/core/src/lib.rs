//! Cubic Luenberger-type observers for linear time-invariant plants.
//!
//! The crate covers gain synthesis ([`design`]), certificates for global
//! stability, robustness to `A + εI` perturbations and observer-based
//! feedback, fixed-step simulation with the metrics used to compare cubic and
//! linear observers ([`sim`]), γ sweeps ([`sweep`]) and the command-line
//! front end ([`cli`]).
//!
//! Sweeps and randomized searches run on rayon when the default `parallel`
//! feature is on; see [`par::Execution`].

pub mod cli;
pub mod design;
pub mod error;
pub mod numlin;
pub mod par;
pub mod random;
pub mod sim;
pub mod sweep;
pub mod sysmodel;

pub use design::{
    certify_stability, feedback_certificate, place_poles_single_output, robustness_bound,
    synthesize_cubic_gain, Certificate, CubicObserverDesign, LinearObserverDesign,
};
pub use error::{Error, Result};
pub use numlin::{Matrix, Vector};
pub use par::Execution;
pub use sim::{compute_metrics, Metrics, SimConfig, Trace};
pub use sysmodel::{InputSignal, LinearSystem, PerturbedFamily, SignalKind};
