//! Core algorithms for comparing multi-channel telemetry tracks.
//!
//! Everything in this crate is pure computation over in-memory values and
//! builds without `std` (an allocator is required). Persistence, ingestion,
//! the HTTP service and the command line live in the `trackdiff` crate.
//!
//! The main entry points:
//!
//! - [`model`]: tracks, channels, validation, resampling and z-scoring.
//! - [`metrics`]: Euclidean (RMS), banded DTW, Pearson and the ensemble
//!   similarity score `SS = PC - (ED + DTW) / k`.
//! - [`compression`]: continuous piecewise-linear least-squares fits with
//!   greedy hinge placement.
//! - [`analysis`]: top-K retrieval, reference-based anomaly detection,
//!   Welch statistics and synthetic track generators.
//! - [`learn`]: similar/dissimilar classifiers and AUC evaluation.
#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod analysis;
pub mod compression;
mod error;
pub mod learn;
pub mod metrics;
pub mod model;
pub mod stats;

pub use error::{Error, Result};
pub use model::{ChannelSeries, MonitorItemSet, Track, TrackKey};
