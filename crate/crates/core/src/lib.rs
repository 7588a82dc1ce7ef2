//! Goodness-of-fit testing for temporal point processes with estimated
//! parameters.
//!
//! The pieces, bottom up: [`model`] (intensities and compensators of seven
//! families), [`simulate`] (Ogata thinning), [`estimate`] (maximum
//! likelihood), [`stattests`] (KS, Cramér-von Mises, Anderson-Darling against
//! fully specified nulls), [`gof`] (compensated process, martingale
//! transform, and the three testing procedures), [`harness`] (Monte Carlo
//! experiments) and [`ingest`] (real event catalogs).

pub mod error;
pub mod estimate;
pub mod gof;
pub mod harness;
pub mod ingest;
pub mod io;
pub mod model;
pub mod optim;
pub mod quad;
pub mod simulate;
pub mod stattests;

pub use error::{Error, Result};
