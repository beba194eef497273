//! 1D and separable 2D min-convolution kernels.
//!
//! A min-convolution is `h(i) = min_j g(j) + ρ(i - j)`. It is the bottleneck
//! of every message update, so three linear-time kernels are provided next to
//! the quadratic brute-force oracle:
//!
//! * [`dt_l1`] — the two-pass `L1` distance transform,
//! * [`dt_quadratic`] — the lower-envelope-of-parabolas distance transform of
//!   Felzenszwalb and Huttenlocher,
//! * [`smawk_minconv`] — totally monotone matrix search (Aggarwal et al.,
//!   *Algorithmica* 1987) for arbitrary convex `ρ`, which avoids computing
//!   parabola-style intersections in the inner loop.
//!
//! [`minconv2d_into`] composes a column and a row pass of 1D kernels into the
//! truncated 2D min-convolution used by the solver.

use std::cell::Cell;

use crate::label::LabelSpace;
use crate::penalty::Penalty;
use crate::{Error, Result};

/// Distinguished "infinite" cost. A large finite constant is used instead of
/// IEEE infinity so reparameterization arithmetic can never produce NaN from
/// `∞ - ∞` patterns.
pub const INF_COST: f64 = 1e30;

/// Values at or above this threshold are treated as infinite.
#[inline]
pub fn is_inf_cost(x: f64) -> bool {
    x >= 1e29
}

/// Θ(n²) reference evaluation of `h(i) = min_j g(j) + weight·ρ(i-j)`.
pub fn minconv_brute(g: &[f64], penalty: Penalty, weight: f64) -> Vec<f64> {
    assert!(!g.is_empty());
    let n = g.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| g[j] + weight * penalty.eval(i as i32 - j as i32))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Linear-time min-convolution with `ρ(x) = slope·|x|`: a forward pass
/// clamping each value by its left neighbor plus `slope`, then the mirrored
/// backward pass.
pub fn dt_l1(g: &[f64], slope: f64) -> Vec<f64> {
    let mut out = g.to_vec();
    dt_l1_inplace(&mut out, slope);
    out
}

pub fn dt_l1_inplace(values: &mut [f64], slope: f64) {
    assert!(!values.is_empty());
    debug_assert!(slope >= 0.0);
    for i in 1..values.len() {
        let c = values[i - 1] + slope;
        if c < values[i] {
            values[i] = c;
        }
    }
    for i in (0..values.len() - 1).rev() {
        let c = values[i + 1] + slope;
        if c < values[i] {
            values[i] = c;
        }
    }
}

/// Linear-time min-convolution with `ρ(x) = weight·x²` by maintaining the
/// lower envelope of the parabolas rooted at each source point.
pub fn dt_quadratic(g: &[f64], weight: f64) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    let mut v = Vec::new();
    let mut z = Vec::new();
    dt_quadratic_into(g, weight, &mut out, &mut v, &mut z);
    out
}

pub(crate) fn dt_quadratic_into(
    g: &[f64],
    weight: f64,
    out: &mut [f64],
    v: &mut Vec<usize>,
    z: &mut Vec<f64>,
) {
    let n = g.len();
    assert!(n >= 1 && out.len() == n);
    assert!(weight > 0.0, "quadratic distance transform requires weight > 0");
    if n == 1 {
        out[0] = g[0];
        return;
    }
    v.clear();
    v.resize(n, 0);
    z.clear();
    z.resize(n + 1, 0.0);
    // intersection of the parabolas rooted at p and q > p
    let intersect = |p: usize, q: usize| -> f64 {
        ((g[q] + weight * (q * q) as f64) - (g[p] + weight * (p * p) as f64))
            / (2.0 * weight * (q as f64 - p as f64))
    };
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let s = intersect(v[k], q);
            if s <= z[k] {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    let mut k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        out[q] = weight * d * d + g[v[k]];
    }
}

/// Min-convolution for an arbitrary convex penalty via totally monotone
/// matrix search over the implicit matrix `A(i,j) = g(j) + weight·ρ(i-j)`.
///
/// Returns the row minima `h(i) = A(i, ind(i))` and the minimizing column
/// indices, breaking ties toward the smallest column. Only O(n) entries of
/// `A` are ever evaluated; the matrix is never materialized.
///
/// Rejects penalties whose discrete second difference is negative anywhere on
/// the offset range, since total monotonicity would not hold.
pub fn smawk_minconv(g: &[f64], penalty: Penalty, weight: f64) -> Result<(Vec<f64>, Vec<usize>)> {
    let (h, ind, _) = smawk_minconv_counting(g, penalty, weight)?;
    Ok((h, ind))
}

/// Same as [`smawk_minconv`] but also reports how many matrix entries the
/// search evaluated, for work-bound checks.
pub fn smawk_minconv_counting(
    g: &[f64],
    penalty: Penalty,
    weight: f64,
) -> Result<(Vec<f64>, Vec<usize>, u64)> {
    assert!(!g.is_empty());
    let n = g.len();
    if !penalty.is_convex_on(n as i32) {
        return Err(Error::NonConvexPenalty);
    }
    let table: Vec<f64> = (-(n as i32) + 1..n as i32)
        .map(|d| weight * penalty.eval(d))
        .collect();
    let evaluations = Cell::new(0u64);
    let eval = |i: usize, j: usize| -> f64 {
        evaluations.set(evaluations.get() + 1);
        g[j] + table[i + n - 1 - j]
    };
    let mut ind = vec![0usize; n];
    smawk_row_minima_by(g, &table, &eval, &mut ind);
    let h = ind
        .iter()
        .enumerate()
        .map(|(i, &j)| g[j] + table[i + n - 1 - j])
        .collect();
    Ok((h, ind, evaluations.get()))
}

/// Row minima of the implicit min-convolution matrix
/// `A(i,j) = g(j) + rho_table[i - j + n - 1]`. `minima[i]` receives the
/// column of the leftmost minimum of row `i`. `eval` is the (possibly
/// instrumented) entry oracle; `g` and the table are consulted only to prune
/// strictly dominated columns up front, which costs no entry evaluations.
pub(crate) fn smawk_row_minima_by<F: Fn(usize, usize) -> f64>(
    g: &[f64],
    rho_table: &[f64],
    eval: &F,
    minima: &mut [usize],
) {
    let n = g.len();
    debug_assert_eq!(minima.len(), n);
    debug_assert_eq!(rho_table.len(), 2 * n - 1);
    // A column j with g(j) > min g + max ρ can never hold a row minimum:
    // the column attaining min g beats it in every row. Infinite-cost
    // sentinel entries disappear here.
    let rho_max = rho_table[0].max(rho_table[2 * n - 2]);
    let g_min = g.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = g_min + rho_max;
    let mut candidates: Vec<usize> = (0..n).filter(|&j| g[j] <= threshold).collect();
    if candidates.is_empty() {
        candidates = (0..n).collect();
    }
    // Row minima of A are column minima of the transpose, which is again
    // totally monotone.
    let cols: Vec<usize> = (0..n).collect();
    let transposed = |r: usize, c: usize| eval(c, r);
    // entries are at least g_min plus the penalty at their offset, which
    // settles most comparisons without consulting the entry oracle
    let lower_bound = move |r: usize, c: usize| g_min + rho_table[c + n - 1 - r];
    smawk_column_minima_impl(&transposed, &lower_bound, &candidates, &cols, minima);
}

/// The SMAWK recursion: REDUCE prunes rows that cannot contain a column
/// minimum, the odd columns are solved recursively, and the even columns are
/// filled by scanning between the bracketing odd minima. Ties resolve to the
/// smallest row index.
///
/// Stack entries in REDUCE cache their matrix value lazily: while an entry is
/// on top of a stack of size `k`, every comparison happens at column
/// `cols[k-1]`, so the value is evaluated at most once per entry.
fn smawk_column_minima_impl<F: Fn(usize, usize) -> f64, B: Fn(usize, usize) -> f64>(
    matrix: &F,
    lower_bound: &B,
    rows: &[usize],
    cols: &[usize],
    minima: &mut [usize],
) {
    if cols.is_empty() || rows.is_empty() {
        return;
    }
    if rows.len() == 1 {
        for &c in cols {
            minima[c] = rows[0];
        }
        return;
    }
    if cols.len() == 1 {
        let mut best = (matrix(rows[0], cols[0]), rows[0]);
        for &r in &rows[1..] {
            if lower_bound(r, cols[0]) >= best.0 {
                continue;
            }
            let v = matrix(r, cols[0]);
            if v < best.0 {
                best = (v, r);
            }
        }
        minima[cols[0]] = best.1;
        return;
    }

    // REDUCE only pays off when it can shrink the row set below the column
    // count; a superset of the minima-carrying rows stays correct either way.
    let reduced: Vec<usize>;
    let rows: &[usize] = if rows.len() > 3 * cols.len() / 2 {
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(cols.len());
        for &r in rows {
            loop {
                let len = stack.len();
                if len == 0 {
                    break;
                }
                let c = cols[len - 1];
                let top = &mut stack[len - 1];
                if !top.1.is_nan() && top.1 <= lower_bound(r, c) {
                    // the incumbent provably survives this challenger
                    break;
                }
                if top.1.is_nan() {
                    top.1 = matrix(top.0, c);
                    if top.1 <= lower_bound(r, c) {
                        break;
                    }
                }
                if top.1 > matrix(r, c) {
                    stack.pop();
                } else {
                    break;
                }
            }
            if stack.len() != cols.len() {
                stack.push((r, f64::NAN));
            }
        }
        reduced = stack.into_iter().map(|(r, _)| r).collect();
        &reduced
    } else {
        rows
    };

    let odd_cols: Vec<usize> = cols.iter().copied().skip(1).step_by(2).collect();
    smawk_column_minima_impl(matrix, lower_bound, rows, &odd_cols, minima);

    let mut r = 0;
    for (idx, &col) in cols.iter().enumerate().step_by(2) {
        let mut row = rows[r];
        let last_row = if idx == cols.len() - 1 {
            rows[rows.len() - 1]
        } else {
            minima[cols[idx + 1]]
        };
        if row == last_row {
            // the bracketing minima pin this column to a single candidate
            minima[col] = row;
            continue;
        }
        let mut best = (matrix(row, col), row);
        while row != last_row {
            r += 1;
            row = rows[r];
            if lower_bound(row, col) >= best.0 {
                continue;
            }
            let value = matrix(row, col);
            if value < best.0 {
                best = (value, row);
            }
        }
        minima[col] = best.1;
    }
}

/// Reusable buffers for [`minconv2d_into`].
#[derive(Debug, Default)]
pub struct MinConv2dScratch {
    rho: Vec<f64>,
    col_in: Vec<f64>,
    col_out: Vec<f64>,
    env_v: Vec<usize>,
    env_z: Vec<f64>,
    smawk_ind: Vec<usize>,
}

impl MinConv2dScratch {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Truncated 2D min-convolution over the label square:
///
/// `m(t) = min( D(t), min_s φ(s) + weight·τ )` with
/// `D(t) = min_s φ(s) + weight·(ρ(t¹-s¹) + ρ(t²-s²))`.
///
/// `D` is computed separably: a 1D min-convolution along every row of the
/// label square (horizontal displacement), then one along every column. The
/// kernel is chosen by penalty kind: the `L1` and quadratic distance
/// transforms, or SMAWK search for other convex penalties. `weight` scales
/// both `ρ` and `τ`, matching how an edge weight multiplies the whole
/// smoothness term. `tau = ∞` skips the truncation branch.
pub fn minconv2d_into(
    phi: &[f64],
    labels: &LabelSpace,
    penalty: Penalty,
    weight: f64,
    tau: f64,
    scratch: &mut MinConv2dScratch,
    out: &mut [f64],
) {
    let side = labels.side();
    let m = labels.size();
    assert_eq!(phi.len(), m);
    assert_eq!(out.len(), m);
    debug_assert!(weight >= 0.0 && weight.is_finite());

    let min_phi = phi.iter().copied().fold(f64::INFINITY, f64::min);
    debug_assert!(min_phi.is_finite());
    if weight == 0.0 {
        out.fill(min_phi);
        return;
    }

    scratch.rho.clear();
    scratch
        .rho
        .extend((-(side as i32) + 1..side as i32).map(|d| weight * penalty.eval(d)));

    for r in 0..side {
        let (src, dst) = (&phi[r * side..(r + 1) * side], &mut out[r * side..(r + 1) * side]);
        conv_1d(
            src,
            dst,
            penalty,
            weight,
            &scratch.rho,
            &mut scratch.env_v,
            &mut scratch.env_z,
            &mut scratch.smawk_ind,
        );
    }

    scratch.col_in.resize(side, 0.0);
    scratch.col_out.resize(side, 0.0);
    for c in 0..side {
        for r in 0..side {
            scratch.col_in[r] = out[r * side + c];
        }
        let (col_in, col_out) = (&scratch.col_in[..side], &mut scratch.col_out[..side]);
        conv_1d(
            col_in,
            col_out,
            penalty,
            weight,
            &scratch.rho,
            &mut scratch.env_v,
            &mut scratch.env_z,
            &mut scratch.smawk_ind,
        );
        for r in 0..side {
            out[r * side + c] = scratch.col_out[r];
        }
    }

    if tau.is_finite() {
        let cap = min_phi + weight * tau;
        for v in out.iter_mut() {
            if *v > cap {
                *v = cap;
            }
        }
    }
}

/// Allocating convenience wrapper around [`minconv2d_into`].
pub fn minconv2d(phi: &[f64], labels: &LabelSpace, penalty: Penalty, weight: f64, tau: f64) -> Vec<f64> {
    let mut out = vec![0.0; labels.size()];
    let mut scratch = MinConv2dScratch::new();
    minconv2d_into(phi, labels, penalty, weight, tau, &mut scratch, &mut out);
    out
}

/// Θ(M²) reference for the truncated 2D min-convolution.
pub fn minconv2d_brute(
    phi: &[f64],
    labels: &LabelSpace,
    penalty: Penalty,
    weight: f64,
    tau: f64,
) -> Vec<f64> {
    let m = labels.size();
    assert_eq!(phi.len(), m);
    let min_phi = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out = vec![0.0; m];
    for ti in 0..m {
        let t = labels.label(ti);
        let mut best = f64::INFINITY;
        for si in 0..m {
            let s = labels.label(si);
            let v = phi[si] + weight * (penalty.eval(t.0 - s.0) + penalty.eval(t.1 - s.1));
            if v < best {
                best = v;
            }
        }
        if tau.is_finite() {
            let cap = min_phi + weight * tau;
            if best > cap {
                best = cap;
            }
        }
        out[ti] = best;
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv_1d(
    src: &[f64],
    dst: &mut [f64],
    penalty: Penalty,
    weight: f64,
    rho: &[f64],
    env_v: &mut Vec<usize>,
    env_z: &mut Vec<f64>,
    smawk_ind: &mut Vec<usize>,
) {
    let n = src.len();
    match penalty {
        Penalty::L1 => {
            dst.copy_from_slice(src);
            dt_l1_inplace(dst, weight);
        }
        Penalty::SquaredL2 => dt_quadratic_into(src, weight, dst, env_v, env_z),
        Penalty::Charbonnier { .. } => {
            smawk_ind.clear();
            smawk_ind.resize(n, 0);
            let eval = |i: usize, j: usize| src[j] + rho[i + n - 1 - j];
            smawk_row_minima_by(src, rho, &eval, smawk_ind);
            for i in 0..n {
                dst[i] = src[smawk_ind[i]] + rho[i + n - 1 - smawk_ind[i]];
            }
        }
    }
}
