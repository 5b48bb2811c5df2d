//! Discrete Lagrange problems with Lie-group-valued constraints on finite
//! cellular complexes.
//!
//! The crate is organised bottom-up:
//!
//! - [`complex`]: vertex/face incidence and interior/frontier classification.
//! - [`liegroup`]: the `SO(n)` backend (exp/log, Ad, Ad*, trace pairing).
//! - [`variational`]: sections, Cartan forms, action, extended Euler–Lagrange
//!   residuals and the boundary identities built on them.
//! - [`reduction`]: reduction of group-valued fields on the triangulated plane,
//!   plaquette flatness, reconstruction and multiplier recovery.
//! - [`harmonic`]: the trace Lagrangian on `SO(n)`, a Riemannian solver and
//!   end-to-end conservation scenarios.
//! - [`io`]: text formats for fields and multipliers.

pub mod complex;
pub mod error;
pub mod harmonic;
pub mod io;
pub mod liegroup;
pub mod reduction;
pub mod variational;

pub use error::{Error, Result};
