//! Discrete optical flow estimation by global optimization over regular grids.
//!
//! The flow field between two images is modeled as a pairwise Markov random
//! field on the 4-connected pixel grid whose labels are all integer
//! displacements in `[-r, r]²`. The objective is a classical Horn–Schunck-type
//! energy: a per-pixel matching cost (truncated normalized cross-correlation
//! or pixelwise squared color distance) plus an edge-weighted, optionally
//! truncated smoothness penalty. The model is optimized directly over the full
//! label space with sequential tree-reweighted message passing (TRW-S); the
//! regular structure of the label space lets every message update run in time
//! linear in the number of labels via separable 1D min-convolutions (distance
//! transforms for `L1`/`L2`, SMAWK totally monotone matrix search for other
//! convex penalties).
//!
//! The main entry point for end-to-end estimation is [`pipeline::run_pipeline`],
//! which downsamples the inputs, builds cost volumes, solves both flow
//! directions, removes inconsistent matches by forward-backward checking,
//! fills the holes, and upscales to full resolution. The individual stages are
//! all public: [`CostVolume`], [`Solver`], [`postprocess`], [`flo`], and
//! [`metrics`].

#![allow(clippy::needless_range_loop)]

pub mod bench;
pub mod config;
pub mod cost;
mod error;
pub mod flo;
pub mod flow;
pub mod grid;
pub mod image;
pub mod imageio;
pub mod label;
pub mod metrics;
pub mod minconv;
pub mod penalty;
pub mod pipeline;
pub mod postprocess;
pub mod solver;
pub mod viz;

pub use config::{DataTerm, SolverConfig};
pub use cost::{CostVolume, EdgeWeights};
pub use error::{Error, Result};
pub use flow::FlowField;
pub use image::Image;
pub use label::LabelSpace;
pub use metrics::FlowMetrics;
pub use penalty::Penalty;
pub use solver::{IterationStat, Solver};
