//! Controlled-experiment harness: the data-term x penalty x truncation
//! condition grid with per-condition parameter search.

use crate::config::{DataTerm, SolverConfig};
use crate::flow::FlowField;
use crate::image::Image;
use crate::metrics::compute_metrics;
use crate::penalty::Penalty;
use crate::pipeline::solve_direction;
use crate::postprocess;
use crate::{Error, Result};

/// Parameter values searched per condition.
#[derive(Debug, Clone)]
pub struct GridRanges {
    pub lambda: Vec<f64>,
    pub tau: Vec<f64>,
    pub beta: Vec<f64>,
    pub zeta: Vec<f64>,
    pub delta: Vec<f64>,
}

impl Default for GridRanges {
    fn default() -> Self {
        GridRanges {
            lambda: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            tau: vec![2.0, 5.0, 10.0],
            beta: vec![0.05, 0.1, 0.2],
            zeta: vec![0.5, 1.0],
            delta: vec![1.0, 2.0, 4.0],
        }
    }
}

impl GridRanges {
    pub fn validate(&self) -> Result<()> {
        let nonempty = !self.lambda.is_empty()
            && !self.tau.is_empty()
            && !self.beta.is_empty()
            && !self.zeta.is_empty()
            && !self.delta.is_empty();
        if !nonempty {
            return Err(Error::Config("grid ranges must all be non-empty".into()));
        }
        if self.tau.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config(
                "tau range must be finite; the untruncated case is its own condition".into(),
            ));
        }
        Ok(())
    }
}

/// One cell of the controlled-evaluation table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCondition {
    pub data_term: DataTerm,
    pub penalty: Penalty,
    pub truncated: bool,
}

impl GridCondition {
    pub fn label(&self) -> String {
        let dt = match self.data_term {
            DataTerm::TruncatedNcc => "ncc",
            DataTerm::PixelwiseHs => "hs",
        };
        let pen = match self.penalty {
            Penalty::L1 => "l1",
            Penalty::SquaredL2 => "l2",
            Penalty::Charbonnier { .. } => "charbonnier",
        };
        let trunc = if self.truncated { "truncated" } else { "untruncated" };
        format!("{dt}+{pen} {trunc}")
    }
}

/// The 2 x 3 x 2 condition grid in table order.
pub fn all_conditions(charbonnier_epsilon: f64) -> Vec<GridCondition> {
    let mut out = Vec::with_capacity(12);
    for data_term in [DataTerm::TruncatedNcc, DataTerm::PixelwiseHs] {
        for penalty in [
            Penalty::L1,
            Penalty::Charbonnier { epsilon: charbonnier_epsilon },
            Penalty::SquaredL2,
        ] {
            for truncated in [true, false] {
                out.push(GridCondition { data_term, penalty, truncated });
            }
        }
    }
    out
}

/// An image pair with full-resolution ground truth.
pub struct GridPair {
    pub first: Image,
    pub second: Image,
    pub gt: FlowField,
}

#[derive(Debug, Clone, Copy)]
pub struct GridParams {
    pub lambda: f64,
    pub tau: f64,
    pub beta: f64,
    pub zeta: f64,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct GridCellResult {
    pub condition: GridCondition,
    pub best: GridParams,
    pub mean_epe: f64,
    /// Per-pair mean EPE under the best parameters, sorted ascending.
    pub per_image_epe: Vec<f64>,
}

/// Runs every condition with a full parameter search and reports the best
/// mean endpoint error per condition. Smaller parameter combinations are
/// preferred only by search order; ties keep the first combination found.
pub fn run_grid(
    pairs: &[GridPair],
    base: &SolverConfig,
    ranges: &GridRanges,
    mut progress: impl FnMut(&str),
) -> Result<Vec<GridCellResult>> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("grid evaluation needs at least one pair".into()));
    }
    ranges.validate()?;
    base.validate()?;
    for (i, pair) in pairs.iter().enumerate() {
        let same = pair.first.width() == pair.second.width()
            && pair.first.height() == pair.second.height()
            && pair.first.width() == pair.gt.width()
            && pair.first.height() == pair.gt.height();
        if !same {
            return Err(Error::InvalidInput(format!("pair {i}: image/gt sizes differ")));
        }
    }
    let eps = match base.penalty {
        Penalty::Charbonnier { epsilon } => epsilon,
        _ => 5.0,
    };

    let mut results = Vec::new();
    for condition in all_conditions(eps) {
        progress(&format!("condition {}", condition.label()));
        let tau_values: Vec<f64> = if condition.truncated {
            ranges.tau.clone()
        } else {
            vec![f64::INFINITY]
        };
        let mut best: Option<GridCellResult> = None;
        for &zeta in &ranges.zeta {
            for &beta in &ranges.beta {
                for &lambda in &ranges.lambda {
                    for &tau in &tau_values {
                        let cfg = SolverConfig {
                            lambda,
                            tau,
                            beta,
                            zeta,
                            delta: ranges.delta[0],
                            penalty: condition.penalty,
                            data_term: condition.data_term,
                            ..base.clone()
                        };
                        // solve once per pair, then sweep delta over the flows
                        let mut flows = Vec::with_capacity(pairs.len());
                        for pair in pairs {
                            let d1 = pair.first.downsample(cfg.scale)?;
                            let d2 = pair.second.downsample(cfg.scale)?;
                            let (fwd, _) = solve_direction(&d1, &d2, &cfg, None, |_| {})?;
                            let (bwd, _) = solve_direction(&d2, &d1, &cfg, None, |_| {})?;
                            flows.push((fwd, bwd));
                        }
                        for &delta in &ranges.delta {
                            let mut epes = Vec::with_capacity(pairs.len());
                            for (pair, (fwd, bwd)) in pairs.iter().zip(&flows) {
                                let checked =
                                    postprocess::consistency_check(fwd, bwd, delta)?;
                                let filled = postprocess::interpolate_fill(&checked)?;
                                let full = postprocess::upscale_flow(
                                    &filled,
                                    cfg.scale,
                                    pair.gt.width(),
                                    pair.gt.height(),
                                )?;
                                let m = compute_metrics(&full, &pair.gt, None)?;
                                epes.push(m.epe_all);
                            }
                            let mean = epes.iter().sum::<f64>() / epes.len() as f64;
                            if best.as_ref().is_none_or(|b| mean < b.mean_epe) {
                                let mut sorted = epes.clone();
                                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                                best = Some(GridCellResult {
                                    condition,
                                    best: GridParams { lambda, tau, beta, zeta, delta },
                                    mean_epe: mean,
                                    per_image_epe: sorted,
                                });
                            }
                        }
                    }
                }
            }
        }
        results.push(best.expect("ranges are non-empty"));
    }
    Ok(results)
}
