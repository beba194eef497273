//! Solver configuration shared by every pipeline stage.

use crate::penalty::Penalty;
use crate::{Error, Result};

/// Which unary matching cost fills the cost volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataTerm {
    /// Patch-based truncated normalized cross-correlation, `1 - max(NCC, 0)`.
    TruncatedNcc,
    /// Pixelwise squared Euclidean distance in RGB.
    PixelwiseHs,
}

/// All tunable parameters of the matching model and optimizer.
///
/// `tau = f64::INFINITY` disables truncation of the smoothness term. The
/// label radius is expressed in solver-resolution pixels: it should cover the
/// largest expected displacement after downsampling by `scale` (see
/// [`radius_for_max_displacement`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Regularization weight `λ ≥ 0`.
    pub lambda: f64,
    /// Smoothness truncation `τ ∈ (0, ∞]`.
    pub tau: f64,
    /// Laplace edge-weight scale `β > 0`.
    pub beta: f64,
    /// Constant unary penalty `ζ ≥ 0` for displacements leaving the image.
    pub zeta: f64,
    /// Forward-backward consistency threshold `δ > 0` (squared 4D distance).
    pub delta: f64,
    /// Label radius in solver-resolution pixels.
    pub radius: u32,
    /// Number of forward-backward message passing iterations, `≥ 1`.
    pub iterations: u32,
    /// Component penalty of the smoothness term.
    pub penalty: Penalty,
    /// Half window of the NCC patch (1 gives 3x3 patches).
    pub patch_radius: u32,
    /// Integer downsampling factor applied to the inputs before matching.
    pub scale: u32,
    /// Unary cost kind.
    pub data_term: DataTerm,
    /// Worker threads used by cost-volume construction and the solver.
    pub threads: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 1.0,
            tau: f64::INFINITY,
            beta: 0.1,
            zeta: 1.0,
            delta: 2.0,
            radius: 8,
            iterations: 3,
            penalty: Penalty::L1,
            patch_radius: 1,
            scale: 3,
            data_term: DataTerm::TruncatedNcc,
            threads: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, msg: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.into()))
            }
        }
        check(self.lambda.is_finite() && self.lambda >= 0.0, "lambda must be finite and >= 0")?;
        check(self.tau > 0.0, "tau must be > 0 (use infinity for no truncation)")?;
        check(self.beta.is_finite() && self.beta > 0.0, "beta must be finite and > 0")?;
        check(self.zeta.is_finite() && self.zeta >= 0.0, "zeta must be finite and >= 0")?;
        check(self.delta.is_finite() && self.delta > 0.0, "delta must be finite and > 0")?;
        check(self.iterations >= 1, "iterations must be >= 1")?;
        check(self.patch_radius >= 1, "patch radius must be >= 1")?;
        check(self.scale >= 1, "scale must be >= 1")?;
        check(self.threads >= 1, "threads must be >= 1")?;
        self.penalty.validate()
    }
}

/// Label radius needed to cover a maximal full-resolution displacement after
/// downsampling: `ceil(max_displacement / scale)`.
pub fn radius_for_max_displacement(max_displacement: f64, scale: u32) -> u32 {
    assert!(max_displacement >= 0.0 && scale >= 1);
    (max_displacement / scale as f64).ceil() as u32
}
