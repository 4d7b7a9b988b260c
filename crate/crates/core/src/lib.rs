//! Decentralized tracking with ADMM on Markov-modulated least-squares problems.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: random connected networks, Laplacian spectra and the block arc
//!   matrices of the edge-based consensus constraint `A x + B z = 0`.
//! * [`process`]: the AR(1) Gaussian parameter chain driving the per-node
//!   least-squares data `(H_i, y_i)`.
//! * [`engine`]: message-passing consensus ADMM agents, one exact round per
//!   parameter change, plus the oracle-certified warm start.
//! * [`oracle`]: centralized ground truth (optimal primal/dual points), the
//!   per-step contraction quantities and the one-step tracking inequality.
//! * [`analysis`]: Monte Carlo harness, fourth-moment estimates, bound
//!   polynomials, contraction-decay fitting and the mean-square bound.
//! * [`config`]: the flat `key = value` experiment configuration.

pub mod analysis;
pub mod config;
pub mod engine;
pub mod error;
pub mod graph;
mod linalg;
pub mod oracle;
pub mod process;

pub use analysis::{
    bound_b1, bound_b2, estimate_decay, fit_decay, monte_carlo, run_track, theorem1_rhs,
    BoundParams, BoundReport, DecayFit, Experiment, MonteCarlo, MomentEstimates, TrackRecord,
};
pub use config::SimConfig;
pub use engine::{AdmmState, NodeInbox};
pub use error::{Error, Result};
pub use graph::{ArcMatrices, GammaConvention, Graph, GraphSpectrum};
pub use oracle::{ContractionQuantities, Lemma1Check, OptimalPoint, Oracle};
pub use process::{Ar1Process, ParameterProcess, ParameterState, ProcessConfig};
