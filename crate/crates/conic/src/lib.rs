//! A small interior-point solver for mixed-cone programs.
//!
//! Variables are real scalars, real or complex vectors and Hermitian
//! matrices, all flattened onto real coordinates. Constraints may be linear
//! equalities and inequalities, second-order cones, convex quadratics,
//! Hermitian PSD blocks, logarithm hypographs `t ≤ ln x` and epigraphs of
//! convex polynomials with nonnegative coefficients.
//!
//! ```
//! use symbiosr_conic::{solve, ConicProgram, SolverOptions};
//! let mut p = ConicProgram::new();
//! let x = p.add_scalar("x").unwrap();
//! p.add_nonneg("lb", x.scalar() - 3.0).unwrap();
//! p.minimize(x.scalar()).unwrap();
//! let rep = solve(&p, &SolverOptions::default());
//! assert!((rep.objective - 3.0).abs() < 1e-6);
//! ```

mod barrier;
pub mod expr;
pub mod program;
pub mod solver;

pub use expr::{CExpr, LinExpr};
pub use program::{verify_point, ConeKind, ConicError, ConicProgram, Sense, Shape, Var, ViolationReport};
pub use solver::{solve, SolveReport, SolveStatus, SolverOptions};
