//! Unary matching costs and Laplace edge weights.

use rayon::prelude::*;

use crate::config::{DataTerm, SolverConfig};
use crate::image::Image;
use crate::label::LabelSpace;
use crate::{Error, Result};

/// Patches whose per-channel variance falls below this carry no matching
/// evidence; their NCC is defined as zero, so the truncated cost is 1.
pub const ZERO_VARIANCE: f64 = 1e-12;

/// Per-channel patch mean and inverse deviation norm, with `inv_norm = 0`
/// marking a zero-variance channel.
#[derive(Clone, Copy, Default)]
struct PatchStats {
    mean: [f64; 3],
    inv_norm: [f64; 3],
}

fn patch_stats(img: &Image, cx: i64, cy: i64, radius: i64) -> PatchStats {
    let mut sum = [0.0f64; 3];
    let mut sum_sq = [0.0f64; 3];
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let px = img.pixel_clamped(cx + dx, cy + dy);
            for c in 0..3 {
                let v = px[c] as f64;
                sum[c] += v;
                sum_sq[c] += v * v;
            }
        }
    }
    let count = ((2 * radius + 1) * (2 * radius + 1)) as f64;
    let mut stats = PatchStats::default();
    for c in 0..3 {
        let mean = sum[c] / count;
        let ssd = (sum_sq[c] - count * mean * mean).max(0.0);
        stats.mean[c] = mean;
        stats.inv_norm[c] = if ssd / count < ZERO_VARIANCE {
            0.0
        } else {
            1.0 / ssd.sqrt()
        };
    }
    stats
}

fn patch_dot(a: &Image, ax: i64, ay: i64, b: &Image, bx: i64, by: i64, radius: i64) -> [f64; 3] {
    let mut dot = [0.0f64; 3];
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let pa = a.pixel_clamped(ax + dx, ay + dy);
            let pb = b.pixel_clamped(bx + dx, by + dy);
            for c in 0..3 {
                dot[c] += pa[c] as f64 * pb[c] as f64;
            }
        }
    }
    dot
}

fn ncc_from_stats(
    dot: [f64; 3],
    count: f64,
    s1: &PatchStats,
    s2: &PatchStats,
) -> f64 {
    let mut ncc_sum = 0.0;
    for c in 0..3 {
        ncc_sum += (dot[c] - count * s1.mean[c] * s2.mean[c]) * s1.inv_norm[c] * s2.inv_norm[c];
    }
    let ncc = ncc_sum / 3.0;
    1.0 - ncc.max(0.0)
}

/// Truncated NCC matching cost `1 - max(NCC, 0)` between the patch centered
/// at `p` in `i1` and the patch centered at `p + s` in `i2`, averaged over
/// the three channels. Returns `zeta` when the displaced center leaves the
/// image domain; patch samples outside the domain are border-replicated.
pub fn ncc_cost(
    i1: &Image,
    i2: &Image,
    p: (usize, usize),
    s: (i32, i32),
    patch_radius: u32,
    zeta: f64,
) -> f64 {
    let (qx, qy) = (p.0 as i64 + s.0 as i64, p.1 as i64 + s.1 as i64);
    if !i2.contains(qx, qy) {
        return zeta;
    }
    let r = patch_radius as i64;
    let s1 = patch_stats(i1, p.0 as i64, p.1 as i64, r);
    let s2 = patch_stats(i2, qx, qy, r);
    let dot = patch_dot(i1, p.0 as i64, p.1 as i64, i2, qx, qy, r);
    let count = ((2 * r + 1) * (2 * r + 1)) as f64;
    ncc_from_stats(dot, count, &s1, &s2)
}

/// Pixelwise Horn-Schunck matching cost: squared Euclidean RGB distance
/// between `i1(p)` and `i2(p + s)`, or `zeta` out of domain.
pub fn hs_cost(i1: &Image, i2: &Image, p: (usize, usize), s: (i32, i32), zeta: f64) -> f64 {
    let (qx, qy) = (p.0 as i64 + s.0 as i64, p.1 as i64 + s.1 as i64);
    if !i2.contains(qx, qy) {
        return zeta;
    }
    let a = i1.pixel(p.0, p.1);
    let b = i2.pixel(qx as usize, qy as usize);
    (0..3)
        .map(|c| {
            let d = a[c] as f64 - b[c] as f64;
            d * d
        })
        .sum()
}

/// Dense unary potentials: one cost per (pixel, label), pixel-major.
#[derive(Debug, Clone)]
pub struct CostVolume {
    width: usize,
    height: usize,
    labels: LabelSpace,
    values: Vec<f32>,
}

impl CostVolume {
    /// Bytes the value buffer will occupy.
    pub fn required_bytes(width: usize, height: usize, labels: &LabelSpace) -> u64 {
        width as u64 * height as u64 * labels.size() as u64 * 4
    }

    /// Builds the volume for the configured data term. The result is
    /// independent of `cfg.threads`; workers only partition the pixel range.
    /// Fails without allocating when the buffer would exceed `memory_cap`.
    pub fn build(
        i1: &Image,
        i2: &Image,
        cfg: &SolverConfig,
        memory_cap: Option<u64>,
    ) -> Result<Self> {
        cfg.validate()?;
        if i1.width() != i2.width() || i1.height() != i2.height() {
            return Err(Error::InvalidInput(format!(
                "image dimensions differ: {}x{} vs {}x{}",
                i1.width(),
                i1.height(),
                i2.width(),
                i2.height()
            )));
        }
        let labels = LabelSpace::new(cfg.radius);
        let required = Self::required_bytes(i1.width(), i1.height(), &labels);
        if let Some(cap) = memory_cap {
            if required > cap {
                return Err(Error::MemoryBudget { required, cap });
            }
        }
        let (w, h, m) = (i1.width(), i1.height(), labels.size());
        let mut values = vec![0.0f32; w * h * m];

        // Per-pixel patch statistics of i2 are label-independent, so they are
        // computed once up front for the NCC term.
        let stats2: Vec<PatchStats> = match cfg.data_term {
            DataTerm::TruncatedNcc => {
                let r = cfg.patch_radius as i64;
                (0..w * h)
                    .map(|p| patch_stats(i2, (p % w) as i64, (p / w) as i64, r))
                    .collect()
            }
            DataTerm::PixelwiseHs => Vec::new(),
        };

        let fill_pixel = |p: usize, out: &mut [f32]| {
            let (x, y) = (p % w, p / w);
            match cfg.data_term {
                DataTerm::TruncatedNcc => {
                    let r = cfg.patch_radius as i64;
                    let count = ((2 * r + 1) * (2 * r + 1)) as f64;
                    let s1 = patch_stats(i1, x as i64, y as i64, r);
                    for (li, s) in labels.labels().enumerate() {
                        let (qx, qy) = (x as i64 + s.0 as i64, y as i64 + s.1 as i64);
                        out[li] = if !i2.contains(qx, qy) {
                            cfg.zeta as f32
                        } else {
                            let dot = patch_dot(i1, x as i64, y as i64, i2, qx, qy, r);
                            ncc_from_stats(dot, count, &s1, &stats2[qy as usize * w + qx as usize])
                                as f32
                        };
                    }
                }
                DataTerm::PixelwiseHs => {
                    for (li, s) in labels.labels().enumerate() {
                        out[li] = hs_cost(i1, i2, (x, y), s, cfg.zeta) as f32;
                    }
                }
            }
        };

        if cfg.threads == 1 {
            for (p, chunk) in values.chunks_mut(m).enumerate() {
                fill_pixel(p, chunk);
            }
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| {
                values
                    .par_chunks_mut(m)
                    .enumerate()
                    .for_each(|(p, chunk)| fill_pixel(p, chunk));
            });
        }

        Ok(CostVolume { width: w, height: h, labels, values })
    }

    /// Wraps precomputed costs (used by synthetic instances and benchmarks).
    pub fn from_values(
        width: usize,
        height: usize,
        labels: LabelSpace,
        values: Vec<f32>,
    ) -> Result<Self> {
        if values.len() != width * height * labels.size() {
            return Err(Error::InvalidInput(
                "cost volume length does not match dimensions".into(),
            ));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("cost volume contains non-finite values".into()));
        }
        Ok(CostVolume { width, height, labels, values })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn labels(&self) -> &LabelSpace {
        &self.labels
    }

    /// All costs of one pixel, label-indexed.
    #[inline]
    pub fn pixel_costs(&self, x: usize, y: usize) -> &[f32] {
        let m = self.labels.size();
        let p = y * self.width + x;
        &self.values[p * m..(p + 1) * m]
    }

    #[inline]
    pub fn cost(&self, x: usize, y: usize, label_index: usize) -> f32 {
        self.pixel_costs(x, y)[label_index]
    }
}

/// Laplace contrast weights for the two 4-neighbor edge orientations,
/// `w_pq = exp(-‖I(p) - I(q)‖ / β)`, in `(0, 1]`.
#[derive(Debug, Clone)]
pub struct EdgeWeights {
    width: usize,
    height: usize,
    horizontal: Vec<f32>,
    vertical: Vec<f32>,
}

impl EdgeWeights {
    pub fn build(i1: &Image, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive and finite, got {beta}")));
        }
        let (w, h) = (i1.width(), i1.height());
        let weight = |a: [f32; 3], b: [f32; 3]| -> f32 {
            let norm: f64 = (0..3)
                .map(|c| {
                    let d = a[c] as f64 - b[c] as f64;
                    d * d
                })
                .sum::<f64>()
                .sqrt();
            (-norm / beta).exp() as f32
        };
        let mut horizontal = Vec::with_capacity(w.saturating_sub(1) * h);
        for y in 0..h {
            for x in 0..w.saturating_sub(1) {
                horizontal.push(weight(i1.pixel(x, y), i1.pixel(x + 1, y)));
            }
        }
        let mut vertical = Vec::with_capacity(w * h.saturating_sub(1));
        for y in 0..h.saturating_sub(1) {
            for x in 0..w {
                vertical.push(weight(i1.pixel(x, y), i1.pixel(x, y + 1)));
            }
        }
        Ok(EdgeWeights { width: w, height: h, horizontal, vertical })
    }

    /// Constant weights, handy for synthetic instances.
    pub fn uniform(width: usize, height: usize, value: f32) -> Self {
        EdgeWeights {
            width,
            height,
            horizontal: vec![value; width.saturating_sub(1) * height],
            vertical: vec![value; width * height.saturating_sub(1)],
        }
    }

    /// Wraps raw weight planes: `horizontal` has `(w-1)*h` entries indexed by
    /// the left endpoint, `vertical` has `w*(h-1)` indexed by the top one.
    pub fn from_planes(
        width: usize,
        height: usize,
        horizontal: Vec<f32>,
        vertical: Vec<f32>,
    ) -> Result<Self> {
        if horizontal.len() != width.saturating_sub(1) * height
            || vertical.len() != width * height.saturating_sub(1)
        {
            return Err(Error::InvalidInput("edge weight plane lengths are wrong".into()));
        }
        if !horizontal
            .iter()
            .chain(&vertical)
            .all(|w| w.is_finite() && *w > 0.0 && *w <= 1.0)
        {
            return Err(Error::InvalidInput("edge weights must lie in (0, 1]".into()));
        }
        Ok(EdgeWeights { width, height, horizontal, vertical })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Weight of the edge between `(x, y)` and `(x+1, y)`.
    #[inline]
    pub fn horizontal(&self, x: usize, y: usize) -> f32 {
        self.horizontal[y * (self.width - 1) + x]
    }

    /// Weight of the edge between `(x, y)` and `(x, y+1)`.
    #[inline]
    pub fn vertical(&self, x: usize, y: usize) -> f32 {
        self.vertical[y * self.width + x]
    }
}
