//! Generalized linear-quadratic optimal control on finite-dimensional
//! systems
//!
//! ```text
//! minimize  ∫₀ᵀ ‖Cx‖² + ‖Ku‖² + 2⟨z, x⟩ + 2⟨v, u⟩ dt
//! subject to  x' = Ax + Bu,  x(0) = x0
//! ```
//!
//! The crate computes the optimal steady state, integrates the differential
//! Riccati equation, synthesizes optimal trajectories in feedback form and
//! measures how closely they follow the steady state (turnpike behaviour).
//! Structural tests (Hautus, unobservable subspace), a direct-transcription
//! oracle and a spectral model of the heat equation support the experiments.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_loop;
pub mod error;
pub mod glq;
pub mod heat;
pub mod numlin;
pub mod oracle;
pub mod random;
pub mod riccati;
pub mod steady;
pub mod structure;
pub mod turnpike;

pub use closed_loop::{solve_glq, solve_lq, FeedbackLaw, Trajectory};
pub use error::{Error, Result};
pub use glq::{CostBreakdown, GlqProblem};
pub use heat::{HeatConfig, HeatOperator};
pub use numlin::{ComplexMatrix, ComplexVector, Matrix, Vector};
pub use riccati::RiccatiSolution;
pub use steady::SteadyStateResult;
pub use structure::{HautusReport, ObservabilityData, SpectralSplit};
pub use turnpike::{DeviationCurve, ExponentialFit, ScanStatus, TurnpikeReport};
