//! Texture descriptors built from directed pixel networks.
//!
//! A grayscale image is modeled as a directed weighted network for one or
//! more radii ([`network`]). Per-vertex degree and strength maps are sampled
//! in 3x3 windows and used to train small randomized neural networks with
//! deterministic hidden weights ([`rnn`]); the trained output weights form
//! the texture signature ([`signature`]). [`eval`] provides an LDA
//! classifier with leave-one-out validation and parameter sweeps, and
//! [`features`] handles persistence of feature tables and reports.

pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod network;
pub mod rnn;
pub mod signature;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use ingest::{load_gray, scan_dataset, GrayImage, LabeledDataset};
pub use network::{compute_measures, Measure, MeasureMaps};
pub use signature::{Signature, SignatureExtractor, TrainingOptions};
