//! Krotov gate control for a qubit coupled to a non-Markovian bath.
//!
//! The bath enters only through its correlation function, written as a sum of
//! complex exponentials ([`bath`]). Those terms drive time-local memory
//! functions that fix the exact master equation ([`dynamics`]); the control
//! pulse is shaped against a target superoperator ([`optimizer`]) and the
//! result is split into dissipation and phase parts ([`analysis`]).

pub mod analysis;
pub mod bath;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod optimizer;

pub use error::{Error, Result};
