//! Optimal control of the non-smooth semilinear elliptic equation
//! `-Δy + max(0, y) = u + f` on the unit square.
//!
//! The crate discretizes the state equation with P1 finite elements and a
//! lumped non-smooth term, and solves the resulting optimality system
//!
//! ```text
//! A y + D max(0, y) = M f - (1/α) M p
//! A p + D (χ ∘ p)   = M (y - y_d)
//! y_i = prox_γ(y_i + γ χ_i)
//! ```
//!
//! with a semi-smooth Newton method ([`kkt`]). Around it sit a forward solver
//! and derivative tools ([`state`]), a smoothed-max continuation path
//! ([`regpath`]), stationarity diagnostics ([`stationarity`]), and an
//! experiment harness with manufactured solutions ([`harness`]).

pub mod error;
pub mod fe;
pub mod harness;
pub mod kkt;
pub mod nonsmooth;
pub mod regpath;
pub mod sparse;
pub mod state;
pub mod stationarity;

pub use error::{Error, Result};
pub use fe::{FeFunction, FeOperators, FeSpace, TriMesh};
pub use kkt::{KktConfig, KktPoint, ProblemData};
pub use sparse::{CsrMatrix, Triplet};
pub use state::{NewtonReport, StateProblem};
