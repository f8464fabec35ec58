//! Gaussian processes on oriented cellular complexes.
//!
//! The crate is organised bottom-up:
//!
//! - [`complex`]: cells, signed incidence matrices, grid builders, relabelings.
//! - [`operators`]: coboundaries, adjoints, Hodge and super-Laplacians, the
//!   Dirac matrix, and weighted-orthonormal eigendecompositions.
//! - [`kernels`]: Matérn and reaction-diffusion spectral kernels.
//! - [`gp`]: posterior, marginal likelihood and Adam hyperparameter fitting.
//! - [`fields`]: synthetic Karhunen-Loève edge fields, grid projections, datasets.
//! - [`experiment`]: the signal-mixing comparison pipeline.
//!
//! Independent work items (prior samples, hyperparameter sweeps, experiment
//! seeds) run on rayon when the `parallel` feature is enabled; see [`par`].

pub mod complex;
pub mod error;
pub mod experiment;
pub mod fields;
pub mod gp;
pub mod kernels;
pub mod operators;
pub mod par;

pub use error::{Error, Result};
