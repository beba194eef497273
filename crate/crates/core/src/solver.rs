//! Sequential tree-reweighted message passing (TRW-S) on the 4-connected
//! pixel grid with the full 2D displacement label space.
//!
//! Messages are updated in anti-diagonal wavefront order: a pixel is ready as
//! soon as its left and up neighbors have been updated in the current sweep,
//! so every anti-diagonal is a set of independent updates that can run in
//! parallel. The backward sweep mirrors the forward one. Each message update
//! is a truncated 2D min-convolution and costs time linear in the number of
//! labels (see [`crate::minconv`]).
//!
//! The solver maximizes a dual lower bound of the labeling energy. The bound
//! is recomputed once per completed forward-backward iteration from the
//! reparameterized potentials by a dedicated pass; it never decreases across
//! iterations and never exceeds the energy of any labeling.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::config::SolverConfig;
use crate::cost::{CostVolume, EdgeWeights};
use crate::flow::FlowField;
use crate::label::LabelSpace;
use crate::minconv::{minconv2d_into, MinConv2dScratch};
use crate::penalty::{Penalty, PenaltyTable};
use crate::{Error, Result};

/// Arrival direction of a stored message, naming the neighbor it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    FromLeft = 0,
    FromUp = 1,
    FromRight = 2,
    FromDown = 3,
}

pub const DIRECTIONS: [Direction; 4] = [
    Direction::FromLeft,
    Direction::FromUp,
    Direction::FromRight,
    Direction::FromDown,
];

const FROM_LEFT: usize = Direction::FromLeft as usize;
const FROM_UP: usize = Direction::FromUp as usize;
const FROM_RIGHT: usize = Direction::FromRight as usize;
const FROM_DOWN: usize = Direction::FromDown as usize;

/// The four directed message planes, indexed by receiving pixel.
///
/// `plane(FromLeft)[p]` is the message sent to pixel `p` by its left
/// neighbor. Slots for edges that leave the grid exist but stay zero, which
/// is equivalent to the message being absent. Every stored message is
/// normalized to have minimum zero; the amount subtracted is accumulated per
/// directed edge in `offsets` so the reparameterization bookkeeping stays
/// explicit.
#[derive(Debug, Clone)]
pub struct MessageStore {
    planes: [Vec<f32>; 4],
    offsets: [Vec<f64>; 4],
    msize: usize,
}

impl MessageStore {
    fn new(pixels: usize, msize: usize) -> Self {
        MessageStore {
            planes: std::array::from_fn(|_| vec![0.0; pixels * msize]),
            offsets: std::array::from_fn(|_| vec![0.0; pixels]),
            msize,
        }
    }

    #[inline]
    pub fn plane(&self, dir: Direction) -> &[f32] {
        &self.planes[dir as usize]
    }

    /// The message arriving at linear pixel `p` from direction `dir`.
    #[inline]
    pub fn message(&self, p: usize, dir: Direction) -> &[f32] {
        &self.planes[dir as usize][p * self.msize..(p + 1) * self.msize]
    }

    /// Normalization constant folded out of the message arriving at `p`.
    #[inline]
    pub fn offset(&self, p: usize, dir: Direction) -> f64 {
        self.offsets[dir as usize][p]
    }

    /// Total of all folded normalization constants.
    pub fn total_offset(&self) -> f64 {
        self.offsets.iter().map(|pl| pl.iter().sum::<f64>()).sum()
    }
}

/// Snapshot handed to the progress callback after each iteration.
#[derive(Debug, Clone)]
pub struct IterationStat {
    pub iteration: u32,
    pub lower_bound: f64,
    pub elapsed: Duration,
}

struct SweepScratch {
    base: Vec<f64>,
    phi: Vec<f64>,
    out: Vec<f64>,
    mc: MinConv2dScratch,
}

impl SweepScratch {
    fn new(msize: usize) -> Self {
        SweepScratch {
            base: vec![0.0; msize],
            phi: vec![0.0; msize],
            out: vec![0.0; msize],
            mc: MinConv2dScratch::new(),
        }
    }
}

/// Raw views of the message planes for wavefront-parallel updates.
///
/// Within one anti-diagonal every update writes only the message slots of its
/// own outgoing edges (target pixels are distinct per plane) and reads only
/// slots finalized in earlier diagonals or in the opposite sweep, so
/// concurrent access through these pointers never overlaps.
#[derive(Clone, Copy)]
struct PlanePtrs {
    msg: [*mut f32; 4],
    off: [*mut f64; 4],
}

unsafe impl Send for PlanePtrs {}
unsafe impl Sync for PlanePtrs {}

struct SweepCtx<'a> {
    cost: &'a CostVolume,
    weights: &'a EdgeWeights,
    labels: LabelSpace,
    penalty: Penalty,
    lambda: f64,
    tau: f64,
    width: usize,
    height: usize,
    msize: usize,
    planes: PlanePtrs,
}

impl SweepCtx<'_> {
    #[inline]
    unsafe fn msg(&self, plane: usize, p: usize) -> &[f32] {
        std::slice::from_raw_parts(self.planes.msg[plane].add(p * self.msize), self.msize)
    }

    // &self -> &mut is sound here: wavefront scheduling guarantees writers
    // target disjoint slots (see PlanePtrs)
    #[allow(clippy::mut_from_ref)]
    #[inline]
    unsafe fn msg_mut(&self, plane: usize, p: usize) -> &mut [f32] {
        std::slice::from_raw_parts_mut(self.planes.msg[plane].add(p * self.msize), self.msize)
    }

    /// Updates the messages pixel `(x, y)` sends to its not-yet-visited
    /// neighbors in the current sweep: right/down on the forward sweep,
    /// left/up on the backward one.
    ///
    /// # Safety
    /// All pixels calling this concurrently must lie on one anti-diagonal of
    /// the grid and the opposite-sweep messages must be quiescent.
    unsafe fn update_pixel(&self, x: usize, y: usize, forward: bool, scratch: &mut SweepScratch) {
        let (w, h, m) = (self.width, self.height, self.msize);
        let p = y * w + x;
        let theta = self.cost.pixel_costs(x, y);
        let (il, iu, ir, id) = (
            self.msg(FROM_LEFT, p),
            self.msg(FROM_UP, p),
            self.msg(FROM_RIGHT, p),
            self.msg(FROM_DOWN, p),
        );
        for s in 0..m {
            scratch.base[s] = theta[s] as f64
                + il[s] as f64
                + iu[s] as f64
                + ir[s] as f64
                + id[s] as f64;
        }

        let mut edges: [Option<(usize, usize, usize, f32)>; 2] = [None, None];
        if forward {
            if x + 1 < w {
                edges[0] = Some((FROM_RIGHT, FROM_LEFT, p + 1, self.weights.horizontal(x, y)));
            }
            if y + 1 < h {
                edges[1] = Some((FROM_DOWN, FROM_UP, p + w, self.weights.vertical(x, y)));
            }
        } else {
            if x > 0 {
                edges[0] = Some((FROM_LEFT, FROM_RIGHT, p - 1, self.weights.horizontal(x - 1, y)));
            }
            if y > 0 {
                edges[1] = Some((FROM_UP, FROM_DOWN, p - w, self.weights.vertical(x, y - 1)));
            }
        }

        for (opposite, target_plane, q, edge_weight) in edges.into_iter().flatten() {
            let opp = self.msg(opposite, p);
            for s in 0..m {
                scratch.phi[s] = 0.5 * scratch.base[s] - opp[s] as f64;
            }
            minconv2d_into(
                &scratch.phi,
                &self.labels,
                self.penalty,
                self.lambda * edge_weight as f64,
                self.tau,
                &mut scratch.mc,
                &mut scratch.out,
            );
            let c = scratch.out.iter().copied().fold(f64::INFINITY, f64::min);
            let dst = self.msg_mut(target_plane, q);
            for t in 0..m {
                dst[t] = (scratch.out[t] - c) as f32;
            }
            *self.planes.off[target_plane].add(q) += c;
        }
    }
}

/// TRW-S solver state: the cost volume, edge weights, message store, and the
/// running dual lower bound.
pub struct Solver {
    cost: CostVolume,
    weights: EdgeWeights,
    labels: LabelSpace,
    penalty: Penalty,
    lambda: f64,
    tau: f64,
    rho: PenaltyTable,
    messages: MessageStore,
    lower_bound: f64,
    iteration: u32,
    pool: Option<rayon::ThreadPool>,
}

impl Solver {
    pub fn new(cost: CostVolume, weights: EdgeWeights, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if cost.width() != weights.width() || cost.height() != weights.height() {
            return Err(Error::InvalidInput(
                "cost volume and edge weights have different dimensions".into(),
            ));
        }
        let labels = *cost.labels();
        if labels.radius() != cfg.radius as i32 {
            return Err(Error::Config(format!(
                "cost volume was built with radius {}, config says {}",
                labels.radius(),
                cfg.radius
            )));
        }
        // checked once here; the message kernels rely on it
        if !cfg.penalty.is_convex_on(2 * labels.radius().max(1)) {
            return Err(Error::NonConvexPenalty);
        }
        let pool = if cfg.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(cfg.threads)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        let rho = PenaltyTable::new(cfg.penalty, 2 * labels.radius());
        let messages = MessageStore::new(cost.width() * cost.height(), labels.size());
        let mut solver = Solver {
            cost,
            weights,
            labels,
            penalty: cfg.penalty,
            lambda: cfg.lambda,
            tau: cfg.tau,
            rho,
            messages,
            lower_bound: 0.0,
            iteration: 0,
            pool,
        };
        solver.lower_bound = solver.compute_lower_bound();
        Ok(solver)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.cost.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.cost.height()
    }

    pub fn labels(&self) -> &LabelSpace {
        &self.labels
    }

    pub fn cost(&self) -> &CostVolume {
        &self.cost
    }

    pub fn messages(&self) -> &MessageStore {
        &self.messages
    }

    /// Current dual lower bound Φ.
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    /// Accumulated message normalization, `Σ` of all per-edge constants.
    pub fn normalization_offset(&self) -> f64 {
        self.messages.total_offset()
    }

    /// Bytes held by the four message planes.
    pub fn message_bytes(width: usize, height: usize, labels: &LabelSpace) -> u64 {
        4 * width as u64 * height as u64 * labels.size() as u64 * 4
    }

    /// One forward-backward pass plus the lower-bound pass.
    pub fn run_iteration(&mut self) {
        self.sweep(true);
        self.sweep(false);
        self.lower_bound = self.compute_lower_bound();
        self.iteration += 1;
    }

    /// Runs `iterations` passes, reporting Φ and wall time after each.
    pub fn run(&mut self, iterations: u32, mut on_iteration: impl FnMut(&IterationStat)) {
        for _ in 0..iterations {
            let start = Instant::now();
            self.run_iteration();
            on_iteration(&IterationStat {
                iteration: self.iteration,
                lower_bound: self.lower_bound,
                elapsed: start.elapsed(),
            });
        }
    }

    fn sweep_ctx(&mut self) -> SweepCtx<'_> {
        let planes = PlanePtrs {
            msg: self.messages.planes.each_mut().map(|v| v.as_mut_ptr()),
            off: self.messages.offsets.each_mut().map(|v| v.as_mut_ptr()),
        };
        SweepCtx {
            cost: &self.cost,
            weights: &self.weights,
            labels: self.labels,
            penalty: self.penalty,
            lambda: self.lambda,
            tau: self.tau,
            width: self.cost.width(),
            height: self.cost.height(),
            msize: self.labels.size(),
            planes,
        }
    }

    fn sweep(&mut self, forward: bool) {
        let (w, h, m) = (self.cost.width(), self.cost.height(), self.labels.size());
        let pool = self.pool.take();
        let ctx = self.sweep_ctx();
        let max_diag = w + h - 2;
        let diagonals: Vec<usize> = if forward {
            (0..=max_diag).collect()
        } else {
            (0..=max_diag).rev().collect()
        };
        if let Some(pool) = &pool {
            pool.install(|| {
                for d in &diagonals {
                    let x_lo = d.saturating_sub(h - 1);
                    let x_hi = (*d).min(w - 1);
                    (x_lo..=x_hi).into_par_iter().for_each_init(
                        || SweepScratch::new(m),
                        |scratch, x| unsafe { ctx.update_pixel(x, d - x, forward, scratch) },
                    );
                }
            });
        } else {
            let mut scratch = SweepScratch::new(m);
            for d in &diagonals {
                let x_lo = d.saturating_sub(h - 1);
                let x_hi = (*d).min(w - 1);
                for x in x_lo..=x_hi {
                    unsafe { ctx.update_pixel(x, d - x, forward, &mut scratch) };
                }
            }
        }
        self.pool = pool;
    }

    /// Raster-order serial sweep used to validate that the wavefront schedule
    /// computes the same messages (the dependency closure is identical).
    #[cfg(test)]
    fn run_iteration_scanline(&mut self) {
        let (w, h, m) = (self.cost.width(), self.cost.height(), self.labels.size());
        {
            let ctx = self.sweep_ctx();
            let mut scratch = SweepScratch::new(m);
            for y in 0..h {
                for x in 0..w {
                    unsafe { ctx.update_pixel(x, y, true, &mut scratch) };
                }
            }
            for y in (0..h).rev() {
                for x in (0..w).rev() {
                    unsafe { ctx.update_pixel(x, y, false, &mut scratch) };
                }
            }
        }
        self.lower_bound = self.compute_lower_bound();
        self.iteration += 1;
    }

    /// Φ: the dual value of the monotone-chain decomposition. Every row and
    /// every column of the grid is one chain; a pixel's reparameterized unary
    /// `θ̃_p = θ_p + Σ m_in` is split evenly between the two chains through it
    /// (wholly to the single chain on 1-pixel-wide grids), each edge belongs
    /// to exactly one chain, and each chain is minimized exactly by dynamic
    /// programming. Summed chain minima lower-bound every labeling because the
    /// chain energies of a fixed labeling add up to `θ̃(l) = θ(l)`; this is
    /// the quantity the message schedule ascends, so it is non-decreasing
    /// across iterations. Each DP transition is one 2D min-convolution.
    ///
    /// The per-edge normalization constants cancel chain-by-chain (a constant
    /// removed from a message leaves every chain sum unchanged), so they do
    /// not appear here.
    fn compute_lower_bound(&self) -> f64 {
        let (w, h, m) = (self.cost.width(), self.cost.height(), self.labels.size());
        let split = if w > 1 && h > 1 { 0.5 } else { 1.0 };

        let reparam_unary = |x: usize, y: usize, acc: &mut [f64], factor: f64| {
            let p = y * w + x;
            let theta = self.cost.pixel_costs(x, y);
            let il = self.messages.message(p, Direction::FromLeft);
            let iu = self.messages.message(p, Direction::FromUp);
            let ir = self.messages.message(p, Direction::FromRight);
            let id = self.messages.message(p, Direction::FromDown);
            for s in 0..m {
                acc[s] += factor
                    * (theta[s] as f64
                        + il[s] as f64
                        + iu[s] as f64
                        + ir[s] as f64
                        + id[s] as f64);
            }
        };

        // one DP step: cur(t) := min_s [cur(s) - m_qp(s) + θ_pq(s,t)] - m_pq(t)
        let transition = |cur: &mut Vec<f64>,
                          m_qp: &[f32],
                          m_pq: &[f32],
                          edge_weight: f32,
                          scratch: &mut SweepScratch| {
            for s in 0..m {
                scratch.phi[s] = cur[s] - m_qp[s] as f64;
            }
            minconv2d_into(
                &scratch.phi,
                &self.labels,
                self.penalty,
                self.lambda * edge_weight as f64,
                self.tau,
                &mut scratch.mc,
                &mut scratch.out,
            );
            for t in 0..m {
                cur[t] = scratch.out[t] - m_pq[t] as f64;
            }
        };

        let row_min = |y: usize, scratch: &mut SweepScratch| -> f64 {
            let mut cur = vec![0.0f64; m];
            reparam_unary(0, y, &mut cur, split);
            for x in 1..w {
                let p = y * w + (x - 1);
                transition(
                    &mut cur,
                    self.messages.message(p, Direction::FromRight),
                    self.messages.message(p + 1, Direction::FromLeft),
                    self.weights.horizontal(x - 1, y),
                    scratch,
                );
                reparam_unary(x, y, &mut cur, split);
            }
            cur.into_iter().fold(f64::INFINITY, f64::min)
        };
        let col_min = |x: usize, scratch: &mut SweepScratch| -> f64 {
            let mut cur = vec![0.0f64; m];
            reparam_unary(x, 0, &mut cur, split);
            for y in 1..h {
                let p = (y - 1) * w + x;
                transition(
                    &mut cur,
                    self.messages.message(p, Direction::FromDown),
                    self.messages.message(p + w, Direction::FromUp),
                    self.weights.vertical(x, y - 1),
                    scratch,
                );
                reparam_unary(x, y, &mut cur, split);
            }
            cur.into_iter().fold(f64::INFINITY, f64::min)
        };

        // chains with singleton extent only exist on degenerate grids and
        // carry no unary share there
        let rows_active = w > 1 || h == 1;
        let cols_active = h > 1;

        // Contributions are accumulated in index order in both execution
        // modes, so Φ is independent of the thread count.
        let (rows, cols): (Vec<f64>, Vec<f64>) = if let Some(pool) = &self.pool {
            pool.install(|| {
                let rows: Vec<f64> = if rows_active {
                    (0..h)
                        .into_par_iter()
                        .map_init(|| SweepScratch::new(m), |s, y| row_min(y, s))
                        .collect()
                } else {
                    Vec::new()
                };
                let cols: Vec<f64> = if cols_active {
                    (0..w)
                        .into_par_iter()
                        .map_init(|| SweepScratch::new(m), |s, x| col_min(x, s))
                        .collect()
                } else {
                    Vec::new()
                };
                (rows, cols)
            })
        } else {
            let mut scratch = SweepScratch::new(m);
            (
                if rows_active {
                    (0..h).map(|y| row_min(y, &mut scratch)).collect()
                } else {
                    Vec::new()
                },
                if cols_active {
                    (0..w).map(|x| col_min(x, &mut scratch)).collect()
                } else {
                    Vec::new()
                },
            )
        };
        rows.iter().sum::<f64>() + cols.iter().sum::<f64>()
    }

    /// Computes the normalized message a pixel would send to one neighbor in
    /// the current state, without committing it. Returns the message and the
    /// normalization constant that was subtracted.
    pub fn peek_message(&self, x: usize, y: usize, toward: Direction) -> (Vec<f64>, f64) {
        let (w, h, m) = (self.cost.width(), self.cost.height(), self.labels.size());
        let p = y * w + x;
        let (opposite, edge_weight) = match toward {
            Direction::FromLeft => {
                assert!(x + 1 < w, "no right neighbor");
                (Direction::FromRight, self.weights.horizontal(x, y))
            }
            Direction::FromUp => {
                assert!(y + 1 < h, "no down neighbor");
                (Direction::FromDown, self.weights.vertical(x, y))
            }
            Direction::FromRight => {
                assert!(x > 0, "no left neighbor");
                (Direction::FromLeft, self.weights.horizontal(x - 1, y))
            }
            Direction::FromDown => {
                assert!(y > 0, "no up neighbor");
                (Direction::FromUp, self.weights.vertical(x, y - 1))
            }
        };
        let theta = self.cost.pixel_costs(x, y);
        let opp = self.messages.message(p, opposite);
        let mut phi = vec![0.0f64; m];
        for s in 0..m {
            let incoming: f64 = DIRECTIONS
                .iter()
                .map(|&d| self.messages.message(p, d)[s] as f64)
                .sum();
            phi[s] = 0.5 * (theta[s] as f64 + incoming) - opp[s] as f64;
        }
        let mut out = vec![0.0f64; m];
        let mut scratch = MinConv2dScratch::new();
        minconv2d_into(
            &phi,
            &self.labels,
            self.penalty,
            self.lambda * edge_weight as f64,
            self.tau,
            &mut scratch,
            &mut out,
        );
        let c = out.iter().copied().fold(f64::INFINITY, f64::min);
        for v in out.iter_mut() {
            *v -= c;
        }
        (out, c)
    }

    /// Greedy primal decoding in raster order: each pixel takes the label
    /// minimizing its unary plus the pairwise terms to already-decided
    /// neighbors plus the messages from undecided ones. Ties break toward
    /// the smallest label index.
    pub fn decode_greedy(&self) -> FlowField {
        let (w, h, m) = (self.cost.width(), self.cost.height(), self.labels.size());
        let mut flow = FlowField::constant(w, h, 0.0, 0.0);
        let mut chosen = vec![0usize; w * h];
        let mut cand = vec![0.0f64; m];
        for y in 0..h {
            for x in 0..w {
                let p = y * w + x;
                let theta = self.cost.pixel_costs(x, y);
                let ir = self.messages.message(p, Direction::FromRight);
                let id = self.messages.message(p, Direction::FromDown);
                for s in 0..m {
                    cand[s] = theta[s] as f64 + ir[s] as f64 + id[s] as f64;
                }
                if x > 0 {
                    let lw = self.lambda * self.weights.horizontal(x - 1, y) as f64;
                    let lq = self.labels.label(chosen[p - 1]);
                    for (s, lab) in self.labels.labels().enumerate() {
                        cand[s] += lw * self.rho.rho_s((lab.0 - lq.0, lab.1 - lq.1), self.tau);
                    }
                }
                if y > 0 {
                    let lw = self.lambda * self.weights.vertical(x, y - 1) as f64;
                    let lq = self.labels.label(chosen[p - w]);
                    for (s, lab) in self.labels.labels().enumerate() {
                        cand[s] += lw * self.rho.rho_s((lab.0 - lq.0, lab.1 - lq.1), self.tau);
                    }
                }
                let mut best = 0usize;
                for s in 1..m {
                    if cand[s] < cand[best] {
                        best = s;
                    }
                }
                chosen[p] = best;
                let lab = self.labels.label(best);
                flow.set_uv(x, y, lab.0 as f32, lab.1 as f32);
            }
        }
        flow
    }
}

/// Exact energy of an integer labeling under the model: unaries from the
/// cost volume plus `λ·w_pq·ρ_S` over all 4-neighbor edges.
pub fn energy(flow: &FlowField, cost: &CostVolume, weights: &EdgeWeights, cfg: &SolverConfig) -> f64 {
    let (w, h) = (cost.width(), cost.height());
    assert!(flow.width() == w && flow.height() == h, "flow/cost dimensions differ");
    let labels = cost.labels();
    let rho = PenaltyTable::new(cfg.penalty, 2 * labels.radius());
    let as_label = |x: usize, y: usize| -> (i32, i32) {
        let (u, v) = flow.uv(x, y);
        debug_assert!(u.fract() == 0.0 && v.fract() == 0.0, "energy requires integer flow");
        let s = (u as i32, v as i32);
        assert!(labels.contains(s), "flow ({u},{v}) outside label space");
        s
    };
    let mut total = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            total += cost.cost(x, y, labels.index(as_label(x, y))) as f64;
        }
    }
    for y in 0..h {
        for x in 0..w.saturating_sub(1) {
            let a = as_label(x, y);
            let b = as_label(x + 1, y);
            total += cfg.lambda
                * weights.horizontal(x, y) as f64
                * rho.rho_s((a.0 - b.0, a.1 - b.1), cfg.tau);
        }
    }
    for y in 0..h.saturating_sub(1) {
        for x in 0..w {
            let a = as_label(x, y);
            let b = as_label(x, y + 1);
            total += cfg.lambda
                * weights.vertical(x, y) as f64
                * rho.rho_s((a.0 - b.0, a.1 - b.1), cfg.tau);
        }
    }
    total
}
