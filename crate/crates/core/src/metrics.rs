//! Endpoint-error metrics.

use crate::flow::FlowField;
use crate::{Error, Result};

/// A flow vector counts as an outlier when its endpoint error reaches this
/// many pixels.
pub const OUTLIER_THRESHOLD: f64 = 3.0;

/// Aggregate endpoint-error statistics over the pixels that carry ground
/// truth (and a valid estimate).
#[derive(Debug, Clone)]
pub struct FlowMetrics {
    /// Mean endpoint error over all evaluated pixels.
    pub epe_all: f64,
    /// Mean endpoint error restricted to the provided mask, when one is given.
    pub epe_masked: Option<f64>,
    /// Fraction of evaluated pixels with `EPE ≥ 3`.
    pub outlier_rate: f64,
    /// Dense error map; NaN marks pixels excluded from evaluation.
    pub per_pixel_epe: Vec<f64>,
    /// Number of pixels entering the means.
    pub evaluated: usize,
}

/// Per-pixel endpoint error `√((u-u_gt)² + (v-v_gt)²)`, averaged over pixels
/// where the ground truth (and the estimate) is valid. The optional mask
/// restricts `epe_masked` to a sub-population, e.g. non-occluded pixels.
pub fn compute_metrics(
    flow: &FlowField,
    gt: &FlowField,
    mask: Option<&[bool]>,
) -> Result<FlowMetrics> {
    if flow.width() != gt.width() || flow.height() != gt.height() {
        return Err(Error::InvalidInput(format!(
            "flow {}x{} does not match ground truth {}x{}",
            flow.width(),
            flow.height(),
            gt.width(),
            gt.height()
        )));
    }
    if let Some(m) = mask {
        if m.len() != flow.len() {
            return Err(Error::InvalidInput("mask length mismatch".into()));
        }
    }
    let n = flow.len();
    let mut per_pixel = vec![f64::NAN; n];
    let mut sum = 0.0f64;
    let mut masked_sum = 0.0f64;
    let mut masked_count = 0usize;
    let mut outliers = 0usize;
    let mut evaluated = 0usize;
    for p in 0..n {
        if !gt.valid()[p] || !flow.valid()[p] {
            continue;
        }
        let du = flow.u()[p] as f64 - gt.u()[p] as f64;
        let dv = flow.v()[p] as f64 - gt.v()[p] as f64;
        let epe = (du * du + dv * dv).sqrt();
        per_pixel[p] = epe;
        sum += epe;
        evaluated += 1;
        if epe >= OUTLIER_THRESHOLD {
            outliers += 1;
        }
        if let Some(m) = mask {
            if m[p] {
                masked_sum += epe;
                masked_count += 1;
            }
        }
    }
    let mean = |s: f64, c: usize| if c == 0 { 0.0 } else { s / c as f64 };
    Ok(FlowMetrics {
        epe_all: mean(sum, evaluated),
        epe_masked: mask.map(|_| mean(masked_sum, masked_count)),
        outlier_rate: mean(outliers as f64, evaluated),
        per_pixel_epe: per_pixel,
        evaluated,
    })
}
