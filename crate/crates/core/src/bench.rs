//! Micro-benchmarks for the message kernels and the parallel sweep, with
//! log-log exponent fits.

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::config::SolverConfig;
use crate::cost::{CostVolume, EdgeWeights};
use crate::label::LabelSpace;
use crate::minconv::{minconv2d_brute, minconv2d_into, MinConv2dScratch};
use crate::penalty::Penalty;
use crate::solver::{Solver, DIRECTIONS};

#[derive(Debug, Clone, Copy)]
pub struct KernelSample {
    /// Label count M at this point.
    pub label_count: usize,
    pub seconds_per_update: f64,
}

#[derive(Debug, Clone)]
pub struct KernelScaling {
    pub kernel: &'static str,
    pub samples: Vec<KernelSample>,
    /// Least-squares slope of `ln t` against `ln M`.
    pub exponent: f64,
}

/// Fits `t ≈ c·M^e` and returns `e`.
pub fn fit_exponent(samples: &[KernelSample]) -> f64 {
    assert!(samples.len() >= 2);
    let xs: Vec<f64> = samples.iter().map(|s| (s.label_count as f64).ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.seconds_per_update.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

/// Times one message-kernel evaluation per label count for the fast `L1`
/// distance-transform path, the SMAWK path (Charbonnier), and the quadratic
/// brute force, over the given label radii.
pub fn bench_kernels(radii: &[u32], seed: u64) -> Vec<KernelScaling> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = 5.0;
    // best of several batches: robust against transient machine load
    fn best_of(batches: usize, reps: usize, mut body: impl FnMut()) -> f64 {
        let mut best = f64::INFINITY;
        for _ in 0..batches {
            let t = Instant::now();
            for _ in 0..reps {
                body();
            }
            best = best.min(t.elapsed().as_secs_f64() / reps as f64);
        }
        best
    }
    let mut l1 = Vec::new();
    let mut smawk = Vec::new();
    let mut brute = Vec::new();
    for &radius in radii {
        let labels = LabelSpace::new(radius);
        let m = labels.size();
        let phi: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut out = vec![0.0; m];
        let mut scratch = MinConv2dScratch::new();

        let fast_reps = (2_000_000 / m).max(3);
        l1.push(KernelSample {
            label_count: m,
            seconds_per_update: best_of(3, fast_reps, || {
                minconv2d_into(&phi, &labels, Penalty::L1, 1.0, tau, &mut scratch, &mut out)
            }),
        });

        smawk.push(KernelSample {
            label_count: m,
            seconds_per_update: best_of(3, fast_reps, || {
                minconv2d_into(
                    &phi,
                    &labels,
                    Penalty::Charbonnier { epsilon: 5.0 },
                    1.0,
                    tau,
                    &mut scratch,
                    &mut out,
                )
            }),
        });

        let brute_reps = (40_000_000 / (m * m)).clamp(1, 200);
        brute.push(KernelSample {
            label_count: m,
            seconds_per_update: best_of(3, brute_reps, || {
                let _ = minconv2d_brute(&phi, &labels, Penalty::L1, 1.0, tau);
            }),
        });
    }
    vec![
        KernelScaling { kernel: "l1-dt", exponent: fit_exponent(&l1), samples: l1 },
        KernelScaling { kernel: "smawk", exponent: fit_exponent(&smawk), samples: smawk },
        KernelScaling { kernel: "brute", exponent: fit_exponent(&brute), samples: brute },
    ]
}

#[derive(Debug, Clone)]
pub struct ThreadBenchPoint {
    pub threads: usize,
    pub seconds_per_iteration: f64,
    /// Largest absolute message difference against the first thread count.
    pub max_message_diff: f64,
    /// Largest absolute decoded-flow difference against the first run.
    pub max_flow_diff: f64,
}

/// Times full solver iterations on one random instance per thread count and
/// verifies the outputs agree with the first configuration.
pub fn bench_threads(
    width: usize,
    height: usize,
    radius: u32,
    iterations: u32,
    thread_counts: &[usize],
    seed: u64,
) -> Vec<ThreadBenchPoint> {
    assert!(!thread_counts.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = LabelSpace::new(radius);
    let values: Vec<f32> = (0..width * height * labels.size())
        .map(|_| rng.gen_range(0.0..1.0))
        .collect();
    let horizontal: Vec<f32> = (0..(width - 1) * height)
        .map(|_| rng.gen_range(0.05..1.0))
        .collect();
    let vertical: Vec<f32> = (0..width * (height - 1))
        .map(|_| rng.gen_range(0.05..1.0))
        .collect();

    type Snapshot = (Vec<Vec<f32>>, Vec<f32>, Vec<f32>);
    let mut reference: Option<Snapshot> = None;
    let mut points = Vec::new();
    for &threads in thread_counts {
        let cost = CostVolume::from_values(width, height, labels, values.clone()).unwrap();
        let weights =
            EdgeWeights::from_planes(width, height, horizontal.clone(), vertical.clone()).unwrap();
        let cfg = SolverConfig {
            radius,
            threads,
            scale: 1,
            ..SolverConfig::default()
        };
        let mut solver = Solver::new(cost, weights, &cfg).unwrap();
        // per-iteration work is constant, so the fastest iteration is the
        // least contaminated by background load
        let mut seconds_per_iteration = f64::INFINITY;
        solver.run(iterations, |stat| {
            seconds_per_iteration = seconds_per_iteration.min(stat.elapsed.as_secs_f64());
        });
        let planes: Vec<Vec<f32>> = DIRECTIONS
            .iter()
            .map(|&d| solver.messages().plane(d).to_vec())
            .collect();
        let flow = solver.decode_greedy();
        let (max_message_diff, max_flow_diff) = match &reference {
            None => {
                reference = Some((planes, flow.u().to_vec(), flow.v().to_vec()));
                (0.0, 0.0)
            }
            Some((ref_planes, ref_u, ref_v)) => {
                let mut md = 0.0f64;
                for (a, b) in planes.iter().zip(ref_planes) {
                    for (x, y) in a.iter().zip(b) {
                        md = md.max((x - y).abs() as f64);
                    }
                }
                let mut fd = 0.0f64;
                for (x, y) in flow.u().iter().zip(ref_u).chain(flow.v().iter().zip(ref_v)) {
                    fd = fd.max((x - y).abs() as f64);
                }
                (md, fd)
            }
        };
        points.push(ThreadBenchPoint {
            threads,
            seconds_per_iteration,
            max_message_diff,
            max_flow_diff,
        });
    }
    points
}
