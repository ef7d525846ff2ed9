//! Sparse random matrices at the spectral edge.
//!
//! The crate is organised along the pipeline a single Monte Carlo sample goes
//! through:
//!
//! * [`ensemble`] draws sparse symmetric matrices with known cumulants,
//! * [`corrections`] evaluates the random correction terms `Z_n` of a sample,
//! * [`scm`] solves the self-consistent polynomial `P(z, w) = 1 + zw + Q(w)`
//!   built from those terms (critical point, shifted edge, Stieltjes branch),
//! * [`spectral`] computes exact spectra, empirical Stieltjes transforms and
//!   resolvent identities,
//! * [`experiments`] runs batches of samples and aggregates edge statistics.
//!
//! Batch work is data parallel over sample indices. With the default
//! `parallel` feature the batches run on a rayon pool; without it the same
//! code runs sequentially and produces bit-identical reports.

pub mod corrections;
pub mod ensemble;
mod error;
pub mod experiments;
pub mod numeric;
pub mod par;
pub mod scm;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};

pub use num_complex::Complex64;
