//! Example-based pedestrian trajectory prediction.
//!
//! Observed crowd motion is matched against an indexed database of stored
//! motion examples; retrieved candidates, neighbors, obstacles, a predicted
//! destination, and per-agent movement traits are fused into a grid of
//! passage weights, and the prediction is read off as a shortest path over
//! that grid. An evaluation harness provides displacement-error benchmarks
//! and ablations over the pipeline.

pub mod config;
pub mod error;
pub mod eval;
pub mod geom;
pub mod featuremap;
pub mod ingest;
pub mod matching;
pub mod personality;
pub mod planner;
pub mod structure;
mod wire;

pub use config::Config;
pub use error::{Error, Result};
