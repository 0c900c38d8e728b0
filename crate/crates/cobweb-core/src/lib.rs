//! Incremental concept formation over 2D images.
//!
//! This crate implements the Cobweb family of incremental concept formation
//! algorithms and a convolutional extension for single-channel images:
//!
//! - [`tree`] — the generic concept tree engine: mixed nominal/continuous
//!   instances, category utility, the four restructuring operations
//!   (add, create, merge, split), pure categorization, and attribute
//!   prediction. Continuous attributes are handled Cobweb/3-style with
//!   per-attribute online Gaussian statistics and an acuity floor.
//! - [`conv`] — Convolutional Cobweb: a filter hierarchy learned over
//!   k×k pixel patches feeding a classification hierarchy over
//!   filter-label encodings, with dynamic depth-1 remapping of filter
//!   references during category utility computation.
//! - [`dataset`] — MNIST-style IDX ingestion (gzip-aware), global pixel
//!   normalization, and seeded stratified sequence construction.
//! - [`eval`] — the incremental predict-then-learn protocol, error
//!   aggregation, bootstrap confidence intervals, and Lowess learning
//!   curves, emitted as CSV plus a JSON summary.
//!
//! Everything is deterministic given a seed: no operation reads ambient
//! entropy, hash-map iteration never feeds an output path, and all
//! model randomness flows from [`dataset::SequenceSpec::seed`].
//!
//! The `cobweb` binary wires these together; see the repository README.

pub mod bootstrap;
pub mod cli;
pub mod config;
pub mod conv;
pub mod dataset;
pub mod eval;
pub mod image;
pub mod instance;
pub mod lowess;
pub mod models;
pub mod stats;
pub mod tree;

pub use image::{Digit, LabeledImage};
pub use instance::{AttributeValue, Instance};
pub use stats::GaussianStat;
pub use tree::{Choice, CobwebTree, NodeId, TreeError};
