//! End-to-end flow estimation: downsample, match, optimize both directions,
//! invalidate inconsistent matches, fill, and upscale.

use std::time::Instant;

use crate::config::SolverConfig;
use crate::cost::{CostVolume, EdgeWeights};
use crate::flow::FlowField;
use crate::image::Image;
use crate::label::LabelSpace;
use crate::postprocess;
use crate::solver::{IterationStat, Solver};
use crate::{Error, Result};

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Default)]
pub struct StageTimes {
    pub downsample: f64,
    pub cost_forward: f64,
    pub solve_forward: f64,
    pub cost_backward: f64,
    pub solve_backward: f64,
    pub consistency: f64,
    pub interpolate: f64,
    pub upscale: f64,
}

/// Sizes of the two large allocations at solver resolution.
#[derive(Debug, Clone, Copy)]
pub struct MemoryEstimate {
    pub cost_volume_bytes: u64,
    pub message_bytes: u64,
}

impl MemoryEstimate {
    pub fn total(&self) -> u64 {
        self.cost_volume_bytes + self.message_bytes
    }
}

/// Progress notifications consumed by the CLI.
pub enum PipelineEvent<'a> {
    Stage(&'static str),
    Iteration { backward: bool, stat: &'a IterationStat },
}

/// Everything the pipeline produces, at solver and full resolution.
pub struct PipelineResult {
    /// Final dense full-resolution flow (filled and upscaled).
    pub flow: FlowField,
    /// Forward solver decode at solver resolution, before any invalidation.
    pub solver_flow: FlowField,
    /// Backward solver decode at solver resolution.
    pub backward_flow: FlowField,
    /// Forward flow after consistency checking (solver resolution).
    pub consistent_flow: FlowField,
    pub forward_log: Vec<IterationStat>,
    pub backward_log: Vec<IterationStat>,
    pub stage_times: StageTimes,
    pub memory: MemoryEstimate,
}

/// Predicted sizes of the cost volume and the message store for inputs of
/// the given full resolution under `cfg`.
pub fn estimate_memory(full_width: usize, full_height: usize, cfg: &SolverConfig) -> MemoryEstimate {
    let s = cfg.scale as usize;
    let (w, h) = (full_width.div_ceil(s), full_height.div_ceil(s));
    let labels = LabelSpace::new(cfg.radius);
    MemoryEstimate {
        cost_volume_bytes: CostVolume::required_bytes(w, h, &labels),
        message_bytes: Solver::message_bytes(w, h, &labels),
    }
}

/// Builds a cost volume and solves one direction, returning the decoded flow
/// and the per-iteration log.
pub fn solve_direction(
    first: &Image,
    second: &Image,
    cfg: &SolverConfig,
    memory_cap: Option<u64>,
    mut on_iteration: impl FnMut(&IterationStat),
) -> Result<(FlowField, Vec<IterationStat>)> {
    let cost = CostVolume::build(first, second, cfg, memory_cap)?;
    let weights = EdgeWeights::build(first, cfg.beta)?;
    let mut solver = Solver::new(cost, weights, cfg)?;
    let mut log = Vec::with_capacity(cfg.iterations as usize);
    solver.run(cfg.iterations, |stat| {
        log.push(stat.clone());
        on_iteration(stat);
    });
    Ok((solver.decode_greedy(), log))
}

/// Runs the full pipeline on a full-resolution image pair.
pub fn run_pipeline(
    first: &Image,
    second: &Image,
    cfg: &SolverConfig,
    memory_cap: Option<u64>,
    mut progress: impl FnMut(PipelineEvent),
) -> Result<PipelineResult> {
    cfg.validate()?;
    if first.width() != second.width() || first.height() != second.height() {
        return Err(Error::InvalidInput(format!(
            "input images differ in size: {}x{} vs {}x{}",
            first.width(),
            first.height(),
            second.width(),
            second.height()
        )));
    }
    let memory = estimate_memory(first.width(), first.height(), cfg);
    if let Some(cap) = memory_cap {
        if memory.total() > cap {
            return Err(Error::MemoryBudget { required: memory.total(), cap });
        }
    }
    let mut times = StageTimes::default();
    let timed = |acc: &mut f64, start: Instant| *acc = start.elapsed().as_secs_f64();

    progress(PipelineEvent::Stage("downsample"));
    let t = Instant::now();
    let d1 = first.downsample(cfg.scale)?;
    let d2 = second.downsample(cfg.scale)?;
    timed(&mut times.downsample, t);

    progress(PipelineEvent::Stage("cost volume (forward)"));
    let t = Instant::now();
    let cost_f = CostVolume::build(&d1, &d2, cfg, memory_cap)?;
    let weights_f = EdgeWeights::build(&d1, cfg.beta)?;
    timed(&mut times.cost_forward, t);

    progress(PipelineEvent::Stage("optimize (forward)"));
    let t = Instant::now();
    let mut solver = Solver::new(cost_f, weights_f, cfg)?;
    let mut forward_log = Vec::new();
    solver.run(cfg.iterations, |stat| {
        forward_log.push(stat.clone());
        progress(PipelineEvent::Iteration { backward: false, stat });
    });
    let solver_flow = solver.decode_greedy();
    drop(solver);
    timed(&mut times.solve_forward, t);

    progress(PipelineEvent::Stage("cost volume (backward)"));
    let t = Instant::now();
    let cost_b = CostVolume::build(&d2, &d1, cfg, memory_cap)?;
    let weights_b = EdgeWeights::build(&d2, cfg.beta)?;
    timed(&mut times.cost_backward, t);

    progress(PipelineEvent::Stage("optimize (backward)"));
    let t = Instant::now();
    let mut solver = Solver::new(cost_b, weights_b, cfg)?;
    let mut backward_log = Vec::new();
    solver.run(cfg.iterations, |stat| {
        backward_log.push(stat.clone());
        progress(PipelineEvent::Iteration { backward: true, stat });
    });
    let backward_flow = solver.decode_greedy();
    drop(solver);
    timed(&mut times.solve_backward, t);

    progress(PipelineEvent::Stage("consistency check"));
    let t = Instant::now();
    let consistent_flow = postprocess::consistency_check(&solver_flow, &backward_flow, cfg.delta)?;
    timed(&mut times.consistency, t);

    progress(PipelineEvent::Stage("interpolate"));
    let t = Instant::now();
    let filled = postprocess::interpolate_fill(&consistent_flow)?;
    timed(&mut times.interpolate, t);

    progress(PipelineEvent::Stage("upscale"));
    let t = Instant::now();
    let flow = postprocess::upscale_flow(&filled, cfg.scale, first.width(), first.height())?;
    timed(&mut times.upscale, t);

    Ok(PipelineResult {
        flow,
        solver_flow,
        backward_flow,
        consistent_flow,
        forward_log,
        backward_log,
        stage_times: times,
        memory,
    })
}
