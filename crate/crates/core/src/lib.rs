//! Numerical toolkit for zero-range (contact and weak-contact) interactions.

pub mod birman_schwinger;
pub mod efimov;
pub mod error;
pub mod free_resolvent;
pub mod grid;
pub mod konno_kuroda;
pub mod linalg;
pub mod potential;
pub mod quadrature;
pub mod resolvent_limit;
pub mod special;
pub mod spectrum;

pub use error::{Error, Result};
