//! Joint network for binary article-quality classification.
//!
//! An article is scored by three cooperating subnetworks over different
//! views of the same document: its visual layout (block sequence), its
//! writing characteristics (hand-crafted feature vector), and its text
//! semantics (hierarchical sentence/document encoder). Gated projections
//! fuse the three representations into a single probability.
//!
//! The crate is organized bottom-up:
//!
//! - [`nn`]: tensors, reverse-mode tape, parameter store, gradient checks
//! - [`article`]: document model, parsing, sentence splitting, vocabulary
//! - [`features`]: writing-characteristic features and layout vectors
//! - [`subnet`]: the three subnetworks
//! - [`model`]: fusion, prediction, ablation masks
//! - [`train`]: optimizer, training loop, metrics
//! - [`synthetic`]: seeded corpus generators for experiments
//! - [`experiments`]: order-disturbance and attention-export studies
//! - [`commands`]: entry points backing the command-line interface

pub mod article;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod experiments;
pub mod features;
pub mod lexicon;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod subnet;
pub mod synthetic;
pub mod train;

pub use nn::Tensor;
