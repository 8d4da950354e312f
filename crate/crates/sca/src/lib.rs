//! Joint precoding and reflection design by successive convex approximation.
//!
//! [`model`] normalizes a channel realization into per-element gains and
//! noise levels. [`lifted`] holds the auxiliary variables of the lifted
//! problem and computes them consistently from a point. [`subproblem`]
//! linearizes around an anchor and assembles the convex program, [`init`]
//! finds a start that meets the SER target and [`sca`] runs the loop for the
//! proposed scheme and its baselines.

pub mod init;
pub mod lifted;
pub mod model;
pub mod sca;
pub mod subproblem;

pub use model::{ALift, LiftOptions, Model, Point, SchurForm, Scheme, ULift};
pub use sca::{
    initialize_feasible, run_baseline, run_model, run_from, run_sca, run_scheme, InitVerdict, ScaError, ScaOptions,
    ScaOutcome, ScaState, ScaTrace, TraceEntry, Verdict,
};
