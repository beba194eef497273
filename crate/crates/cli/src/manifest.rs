//! The run manifest written next to the outputs. A run is reproducible from
//! the manifest alone: it records the resolved configuration, inputs, stage
//! timings, the per-iteration lower-bound log, and the memory estimates.

use serde::Serialize;

use fullflow::pipeline::{MemoryEstimate, StageTimes};
use fullflow::solver::IterationStat;
use fullflow::{DataTerm, Penalty, SolverConfig};

#[derive(Serialize)]
pub struct Manifest {
    pub inputs: Inputs,
    pub config: ConfigDump,
    pub memory: Memory,
    pub stage_seconds: Stages,
    pub iterations: IterationLogs,
    pub outputs: Vec<String>,
}

#[derive(Serialize)]
pub struct Inputs {
    pub first: String,
    pub second: String,
    pub ground_truth: Option<String>,
}

#[derive(Serialize)]
pub struct ConfigDump {
    pub lambda: f64,
    /// "inf" or a number, kept textual so the manifest stays valid JSON.
    pub tau: String,
    pub beta: f64,
    pub zeta: f64,
    pub delta: f64,
    pub radius: u32,
    pub iterations: u32,
    pub penalty: String,
    pub charbonnier_epsilon: Option<f64>,
    pub patch_radius: u32,
    pub scale: u32,
    pub data_term: String,
    pub threads: usize,
}

impl From<&SolverConfig> for ConfigDump {
    fn from(cfg: &SolverConfig) -> Self {
        let (penalty, eps) = match cfg.penalty {
            Penalty::L1 => ("l1", None),
            Penalty::SquaredL2 => ("l2", None),
            Penalty::Charbonnier { epsilon } => ("charbonnier", Some(epsilon)),
        };
        ConfigDump {
            lambda: cfg.lambda,
            tau: if cfg.tau.is_finite() { cfg.tau.to_string() } else { "inf".into() },
            beta: cfg.beta,
            zeta: cfg.zeta,
            delta: cfg.delta,
            radius: cfg.radius,
            iterations: cfg.iterations,
            penalty: penalty.into(),
            charbonnier_epsilon: eps,
            patch_radius: cfg.patch_radius,
            scale: cfg.scale,
            data_term: match cfg.data_term {
                DataTerm::TruncatedNcc => "ncc".into(),
                DataTerm::PixelwiseHs => "hs".into(),
            },
            threads: cfg.threads,
        }
    }
}

#[derive(Serialize)]
pub struct Memory {
    pub cost_volume_bytes: u64,
    pub message_bytes: u64,
    pub total_bytes: u64,
}

impl From<&MemoryEstimate> for Memory {
    fn from(m: &MemoryEstimate) -> Self {
        Memory {
            cost_volume_bytes: m.cost_volume_bytes,
            message_bytes: m.message_bytes,
            total_bytes: m.total(),
        }
    }
}

#[derive(Serialize)]
pub struct Stages {
    pub downsample: f64,
    pub cost_forward: f64,
    pub solve_forward: f64,
    pub cost_backward: f64,
    pub solve_backward: f64,
    pub consistency: f64,
    pub interpolate: f64,
    pub upscale: f64,
}

impl From<&StageTimes> for Stages {
    fn from(t: &StageTimes) -> Self {
        Stages {
            downsample: t.downsample,
            cost_forward: t.cost_forward,
            solve_forward: t.solve_forward,
            cost_backward: t.cost_backward,
            solve_backward: t.solve_backward,
            consistency: t.consistency,
            interpolate: t.interpolate,
            upscale: t.upscale,
        }
    }
}

#[derive(Serialize)]
pub struct IterationLogs {
    pub forward: Vec<IterationEntry>,
    pub backward: Vec<IterationEntry>,
}

#[derive(Serialize)]
pub struct IterationEntry {
    pub iteration: u32,
    pub lower_bound: f64,
    pub seconds: f64,
}

impl From<&IterationStat> for IterationEntry {
    fn from(s: &IterationStat) -> Self {
        IterationEntry {
            iteration: s.iteration,
            lower_bound: s.lower_bound,
            seconds: s.elapsed.as_secs_f64(),
        }
    }
}
