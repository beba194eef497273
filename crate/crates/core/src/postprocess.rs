//! Forward-backward consistency checking, hole filling, and upscaling.

use std::collections::HashMap;

use crate::flow::FlowField;
use crate::{Error, Result};

/// Number of nearest valid pixels blended when filling an invalidated pixel.
pub const FILL_NEIGHBORS: usize = 16;

/// A set of 4D match points with a uniform grid index for exact
/// fixed-radius queries.
///
/// Forward matches are the points `(p, p + f_p)`, backward matches the points
/// `(q + f'_q, q)`. The grid cell size is the query radius, so any point
/// within that distance of a query lies in one of the 3⁴ surrounding cells;
/// candidates are then tested exactly, which keeps the strict-threshold
/// predicate exact rather than approximate.
pub struct MatchPointSet {
    points: Vec<[f64; 4]>,
    cells: HashMap<[i64; 4], Vec<u32>>,
    cell_size: f64,
}

impl MatchPointSet {
    fn from_points(points: Vec<[f64; 4]>, cell_size: f64) -> Self {
        assert!(cell_size > 0.0);
        let mut cells: HashMap<[i64; 4], Vec<u32>> = HashMap::new();
        for (i, pt) in points.iter().enumerate() {
            cells.entry(Self::key(pt, cell_size)).or_default().push(i as u32);
        }
        MatchPointSet { points, cells, cell_size }
    }

    fn key(pt: &[f64; 4], cell: f64) -> [i64; 4] {
        [
            (pt[0] / cell).floor() as i64,
            (pt[1] / cell).floor() as i64,
            (pt[2] / cell).floor() as i64,
            (pt[3] / cell).floor() as i64,
        ]
    }

    /// Points `(q + f'_q, q)` over the valid pixels of a backward flow.
    pub fn from_backward(bwd: &FlowField, cell_size: f64) -> Self {
        let mut points = Vec::with_capacity(bwd.valid_count());
        for y in 0..bwd.height() {
            for x in 0..bwd.width() {
                if bwd.is_valid(x, y) {
                    let (u, v) = bwd.uv(x, y);
                    points.push([
                        x as f64 + u as f64,
                        y as f64 + v as f64,
                        x as f64,
                        y as f64,
                    ]);
                }
            }
        }
        Self::from_points(points, cell_size)
    }

    /// Points `(p, p + f_p)` over the valid pixels of a forward flow.
    pub fn from_forward(fwd: &FlowField, cell_size: f64) -> Self {
        let mut points = Vec::with_capacity(fwd.valid_count());
        for y in 0..fwd.height() {
            for x in 0..fwd.width() {
                if fwd.is_valid(x, y) {
                    let (u, v) = fwd.uv(x, y);
                    points.push([
                        x as f64,
                        y as f64,
                        x as f64 + u as f64,
                        y as f64 + v as f64,
                    ]);
                }
            }
        }
        Self::from_points(points, cell_size)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Whether any stored point lies at squared distance strictly below
    /// `dist_sq` from `query`. Exact as long as `dist_sq ≤ cell_size²`.
    pub fn has_point_within(&self, query: [f64; 4], dist_sq: f64) -> bool {
        debug_assert!(dist_sq <= self.cell_size * self.cell_size + 1e-9);
        let center = Self::key(&query, self.cell_size);
        let mut delta = [0i64; 4];
        for d0 in -1..=1 {
            delta[0] = center[0] + d0;
            for d1 in -1..=1 {
                delta[1] = center[1] + d1;
                for d2 in -1..=1 {
                    delta[2] = center[2] + d2;
                    for d3 in -1..=1 {
                        delta[3] = center[3] + d3;
                        if let Some(bucket) = self.cells.get(&delta) {
                            for &i in bucket {
                                let p = &self.points[i as usize];
                                let d: f64 = (0..4)
                                    .map(|k| {
                                        let d = p[k] - query[k];
                                        d * d
                                    })
                                    .sum();
                                if d < dist_sq {
                                    return true;
                                }
                            }
                        }
                    }
                }
            }
        }
        false
    }
}

/// Marks each forward match `(p, p + f_p)` valid iff the backward point set
/// contains a point within squared 4D distance `delta`. Displacements are
/// left untouched; only the mask changes. Pixels already invalid stay
/// invalid.
pub fn consistency_check(fwd: &FlowField, bwd: &FlowField, delta: f64) -> Result<FlowField> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!("delta must be positive and finite, got {delta}")));
    }
    let set = MatchPointSet::from_backward(bwd, delta.sqrt());
    let mut out = fwd.clone();
    for y in 0..fwd.height() {
        for x in 0..fwd.width() {
            if !fwd.is_valid(x, y) {
                continue;
            }
            let (u, v) = fwd.uv(x, y);
            let query = [
                x as f64,
                y as f64,
                x as f64 + u as f64,
                y as f64 + v as f64,
            ];
            out.set_valid(x, y, set.has_point_within(query, delta));
        }
    }
    Ok(out)
}

/// Fills every invalid pixel with the inverse-distance-weighted average of
/// the [`FILL_NEIGHBORS`] nearest valid pixels. Valid pixels pass through
/// bit-exactly and the output is fully valid.
pub fn interpolate_fill(flow: &FlowField) -> Result<FlowField> {
    let (w, h) = (flow.width(), flow.height());
    if flow.valid_count() == 0 {
        return Err(Error::NoValidPixels);
    }
    let mut out = flow.clone();
    let mut best: Vec<(u64, usize)> = Vec::with_capacity(FILL_NEIGHBORS + 8);
    for y in 0..h {
        for x in 0..w {
            if flow.is_valid(x, y) {
                continue;
            }
            best.clear();
            // expanding Chebyshev rings; ring R can only contain pixels at
            // euclidean distance >= R, so the search may stop once the ring
            // lower bound passes the kept worst distance
            let max_ring = w.max(h);
            let mut ring = 1usize;
            while ring <= max_ring {
                collect_ring(flow, x, y, ring, &mut best);
                if best.len() >= FILL_NEIGHBORS {
                    best.sort_unstable();
                    best.truncate(FILL_NEIGHBORS);
                    let worst = best[best.len() - 1].0;
                    let next = (ring + 1) as u64;
                    if next * next > worst {
                        break;
                    }
                }
                ring += 1;
            }
            best.sort_unstable();
            best.truncate(FILL_NEIGHBORS);
            let mut sum_w = 0.0f64;
            let mut acc = (0.0f64, 0.0f64);
            for &(d2, p) in &best {
                let weight = 1.0 / (d2 as f64).sqrt();
                let (u, v) = (flow.u()[p] as f64, flow.v()[p] as f64);
                acc.0 += weight * u;
                acc.1 += weight * v;
                sum_w += weight;
            }
            out.set_uv(x, y, (acc.0 / sum_w) as f32, (acc.1 / sum_w) as f32);
            out.set_valid(x, y, true);
        }
    }
    Ok(out)
}

fn collect_ring(flow: &FlowField, cx: usize, cy: usize, ring: usize, best: &mut Vec<(u64, usize)>) {
    let (w, h) = (flow.width(), flow.height());
    let (cx, cy, r) = (cx as i64, cy as i64, ring as i64);
    let mut push = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            return;
        }
        let p = y as usize * w + x as usize;
        if flow.valid()[p] {
            let (dx, dy) = (x - cx, y - cy);
            best.push(((dx * dx + dy * dy) as u64, p));
        }
    };
    for x in cx - r..=cx + r {
        push(x, cy - r);
        push(x, cy + r);
    }
    for y in cy - r + 1..cy + r {
        push(cx - r, y);
        push(cx + r, y);
    }
}

/// Bilinear sample of the displacement field at fractional source
/// coordinates (clamped to the domain).
pub fn sample_bilinear(flow: &FlowField, xs: f64, ys: f64) -> (f64, f64) {
    let (w, h) = (flow.width(), flow.height());
    let xs = xs.clamp(0.0, (w - 1) as f64);
    let ys = ys.clamp(0.0, (h - 1) as f64);
    let x0 = xs.floor() as usize;
    let y0 = ys.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = xs - x0 as f64;
    let fy = ys - y0 as f64;
    let at = |x: usize, y: usize| {
        let (u, v) = flow.uv(x, y);
        (u as f64, v as f64)
    };
    let (u00, v00) = at(x0, y0);
    let (u10, v10) = at(x1, y0);
    let (u01, v01) = at(x0, y1);
    let (u11, v11) = at(x1, y1);
    let u = (1.0 - fy) * ((1.0 - fx) * u00 + fx * u10) + fy * ((1.0 - fx) * u01 + fx * u11);
    let v = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11);
    (u, v)
}

/// Upscales a solver-resolution field to full resolution: bilinear resampling
/// of the components, multiplied by `scale` so displacements are measured in
/// full-resolution pixels. Solver pixel `i` is taken to sit at full-resolution
/// coordinate `scale·i + (scale-1)/2` (the center of its source block).
pub fn upscale_flow(flow: &FlowField, scale: u32, target_w: usize, target_h: usize) -> Result<FlowField> {
    if scale == 0 {
        return Err(Error::Config("scale must be >= 1".into()));
    }
    if target_w == 0 || target_h == 0 {
        return Err(Error::InvalidInput("target dimensions must be positive".into()));
    }
    let s = scale as f64;
    let offset = (s - 1.0) / 2.0;
    let mut u = Vec::with_capacity(target_w * target_h);
    let mut v = Vec::with_capacity(target_w * target_h);
    for y in 0..target_h {
        for x in 0..target_w {
            let xs = (x as f64 - offset) / s;
            let ys = (y as f64 - offset) / s;
            let (su, sv) = sample_bilinear(flow, xs, ys);
            u.push((su * s) as f32);
            v.push((sv * s) as f32);
        }
    }
    FlowField::new(target_w, target_h, u, v, vec![true; target_w * target_h])
}

/// Surviving matches as full-resolution `(x1, y1, x2, y2)` rows, the common
/// input of external interpolation tools.
pub fn match_list(flow: &FlowField, scale: u32) -> Vec<[f32; 4]> {
    let s = scale as f32;
    let offset = (s - 1.0) / 2.0;
    let mut rows = Vec::with_capacity(flow.valid_count());
    for y in 0..flow.height() {
        for x in 0..flow.width() {
            if flow.is_valid(x, y) {
                let (u, v) = flow.uv(x, y);
                let x1 = x as f32 * s + offset;
                let y1 = y as f32 * s + offset;
                rows.push([x1, y1, x1 + u * s, y1 + v * s]);
            }
        }
    }
    rows
}
