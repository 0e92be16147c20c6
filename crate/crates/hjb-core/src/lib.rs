//! Solvers and verification tools for degenerate parabolic equations of
//! Hamilton-Jacobi-Bellman type with convex, superlinearly growing gradient
//! nonlinearities.
//!
//! The crate covers four layers:
//!
//! * problem definitions with extended-real Hamiltonian evaluation and
//!   structural assumption checks ([`problem`], [`hamiltonian`], [`growth`],
//!   [`validate`]),
//! * the exponential-in-time change of unknown and convexity utilities
//!   ([`transforms`]),
//! * a monotone explicit finite-difference scheme on truncated rectangular
//!   domains with CFL control and blow-up detection ([`grid`], [`scheme`]),
//! * closed-form and ODE reference solutions ([`oracles`]) and explicit
//!   sub/supersolution barriers with residual certification ([`barriers`]).

pub mod barriers;
pub mod extended;
pub mod grid;
pub mod growth;
pub mod hamiltonian;
pub mod oracles;
pub mod problem;
pub mod scheme;
pub mod transforms;
pub mod validate;

pub mod util;

pub use extended::ExtendedReal;
pub use problem::{AssumptionConstants, Coefficients, ProblemSpec};
