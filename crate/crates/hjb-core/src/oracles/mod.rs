//! Closed-form and ODE-based reference solutions.
pub mod auxiliary;
pub mod manufactured;
pub mod riccati;
