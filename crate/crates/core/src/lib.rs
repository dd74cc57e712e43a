//! Robust model-based discriminant analysis with noise-resistant variable
//! selection.
//!
//! This crate implements a robust Gaussian classifier on patterned
//! (eigenvalue-decomposed) covariance families, fitted by maximizing a
//! trimmed mixture log-likelihood with concentration steps, together with
//! two variable-selection procedures that tolerate outliers and label
//! noise:
//!
//! * a greedy stepwise search scored by a trimmed BIC ([`tbic`]), and
//! * a maximum-likelihood subset selector that treats the relevant index
//!   set as a model parameter ([`mlsubset`]).
//!
//! A simulation laboratory ([`simlab`]) generates contaminated synthetic
//! benchmarks and runs seeded, fully reproducible experiments.
//!
//! The crate is `no_std` compatible (allocation required); all operations
//! are pure functions of their inputs and deterministic for a fixed seed.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod chi2;
pub mod dataset;
pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod mlsubset;
pub mod pattern;
pub mod redda;
pub mod regression;
pub mod seed;
pub mod simlab;
pub mod subsetga;
pub mod tbic;
pub mod trimming;

pub use dataset::LabeledDataset;
pub use error::{Error, Result};
pub use pattern::{ClassParams, EigenDecomposition, PatternedModel};
pub use trimming::TrimmingState;

pub use nalgebra;
