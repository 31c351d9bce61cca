//! Time-domain renewal solvers for the pinned heat kernel and the
//! partition function.
//!
//! The diagonal `p_beta(t, 0, 0)` solves
//! `p = p_0 + beta p_0 * p` (convolution on `[0, t]`). It is discretised by
//! product integration: `p_beta` is taken piecewise linear between grid
//! nodes and integrated exactly against `p_0`, so the scheme is second
//! order even though `p_0` is evaluated only through cell moments.

use serde::{Deserialize, Serialize};

use crate::bessel::{scaled_i, scaled_i_seq};
use crate::error::{Error, Result};
use crate::field::EigenPair;
use crate::lattice::{first_passage_density, free_kernel, LatticePoint, TimeGrid};
use crate::quadrature::GaussLegendre;

/// Relative change of the endpoint under step halving that is tolerated.
pub const SELF_CHECK_TOL: f64 = 1e-4;
const CELL_NODES: usize = 8;

/// `p_beta(t_n, 0, 0)` on a uniform grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelGrid {
    pub dim: usize,
    pub beta: f64,
    pub grid: TimeGrid,
    pub p0_diag: Vec<f64>,
    pub pbeta_diag: Vec<f64>,
}

impl KernelGrid {
    /// Linear interpolation between nodes.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        interpolate(&self.grid, &self.pbeta_diag, t)
    }

    pub fn last(&self) -> f64 {
        *self.pbeta_diag.last().unwrap()
    }

    /// `Z_{beta,t}(0) = 1 + beta int_0^t p_beta(s, 0, 0) ds` by the trapezoid
    /// rule, exact for the piecewise-linear interpolant.
    pub fn partition_curve(&self) -> PartitionCurve {
        let h = self.grid.step();
        let mut z_values = Vec::with_capacity(self.pbeta_diag.len());
        let mut integral = 0.0;
        z_values.push(1.0);
        for w in self.pbeta_diag.windows(2) {
            integral += 0.5 * h * (w[0] + w[1]);
            z_values.push(1.0 + self.beta * integral);
        }
        PartitionCurve {
            grid: self.grid.clone(),
            z_values,
            origin: LatticePoint::origin(self.dim),
        }
    }
}

/// `Z_{beta,t}(x)` on a uniform grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionCurve {
    pub grid: TimeGrid,
    pub z_values: Vec<f64>,
    /// Starting point `x` of `Z_{beta,t}(x)`.
    pub origin: LatticePoint,
}

impl PartitionCurve {
    pub fn value_at(&self, t: f64) -> Result<f64> {
        interpolate(&self.grid, &self.z_values, t)
    }

    pub fn last(&self) -> f64 {
        *self.z_values.last().unwrap()
    }
}

fn interpolate(grid: &TimeGrid, values: &[f64], t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    if t > grid.last() * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} beyond the grid end {}",
            grid.last()
        )));
    }
    let s = t / grid.step();
    let i = (s.floor() as usize).min(values.len() - 1);
    if i + 1 >= values.len() {
        return Ok(values[values.len() - 1]);
    }
    let frac = s - i as f64;
    Ok(values[i] * (1.0 - frac) + values[i + 1] * frac)
}

fn grid_index(grid: &TimeGrid, t: f64) -> Result<usize> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let s = t / grid.step();
    let n = s.round();
    if (s - n).abs() > 1e-9 * s.max(1.0) || n as usize >= grid.len() {
        return Err(Error::InvalidArgument(format!(
            "t = {t} is not a node of the grid (step {}, end {})",
            grid.step(),
            grid.last()
        )));
    }
    Ok(n as usize)
}

/// Hat-function moments of `p_0(., 0, 0)` on each cell `[mh, (m+1)h]`:
/// `(int p_0 (1 - s), int p_0 s)` with `s` the local coordinate.
fn cell_moments(d: usize, h: f64, cells: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(CELL_NODES);
    (0..cells)
        .map(|m| {
            let a = m as f64 * h;
            let mut lo = 0.0;
            let mut hi = 0.0;
            for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                let s = 0.5 * (1.0 + x);
                let k = scaled_i(0, 2.0 * (a + s * h)).powi(d as i32) * 0.5 * w * h;
                lo += k * (1.0 - s);
                hi += k * s;
            }
            (lo, hi)
        })
        .collect()
}

/// Product-integration solution of the renewal equation without the
/// step-halving check.
pub fn solve_pinned_diag_unchecked(beta: f64, grid: &TimeGrid, d: usize) -> Result<KernelGrid> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be >= 0, got {beta}")));
    }
    let h = grid.step();
    let n_nodes = grid.len();
    let moments = cell_moments(d, h, n_nodes.saturating_sub(1).max(1));
    let w0 = moments[0].0;
    // w[m] = int p_0 * (hat centred at mh), m >= 1
    let mut w = vec![0.0; n_nodes];
    w[0] = w0;
    for m in 1..n_nodes {
        w[m] = moments[m - 1].1 + moments.get(m).map_or(0.0, |c| c.0);
    }
    let denom = 1.0 - beta * w0;
    if denom <= 0.0 {
        return Err(Error::CoarseGrid(format!(
            "step {h} too large for beta = {beta}: 1 - beta W_0 = {denom:.3e}"
        )));
    }
    let p0: Vec<f64> = grid
        .values()
        .iter()
        .map(|&t| scaled_i(0, 2.0 * t).powi(d as i32))
        .collect();
    let mut p = Vec::with_capacity(n_nodes);
    p.push(1.0);
    for n in 1..n_nodes {
        let free = p0[n];
        let edge = moments[n - 1].1 * p[0];
        let interior = dot_reversed(&p[1..n], &w[1..n]);
        p.push((free + beta * (edge + interior)) / denom);
    }
    Ok(KernelGrid {
        dim: d,
        beta,
        grid: grid.clone(),
        p0_diag: p0,
        pbeta_diag: p,
    })
}

/// `sum_k a[k] b[len - 1 - k]`, with four independent accumulators.
fn dot_reversed(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut acc = [0.0; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[n - 1 - k];
        acc[1] += a[k + 1] * b[n - 2 - k];
        acc[2] += a[k + 2] * b[n - 3 - k];
        acc[3] += a[k + 3] * b[n - 4 - k];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..n {
        tail += a[k] * b[n - 1 - k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Solves for `p_beta(t, 0, 0)` on `grid` and re-solves with half the step;
/// if the endpoint moves by more than `SELF_CHECK_TOL` (relative) the grid
/// is rejected.
pub fn solve_pinned_diag(beta: f64, grid: &TimeGrid, d: usize) -> Result<KernelGrid> {
    let coarse = solve_pinned_diag_unchecked(beta, grid, d)?;
    let fine = solve_pinned_diag_unchecked(beta, &grid.refined(), d)?;
    let a = coarse.last();
    let b = fine.last();
    let change = (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    if change > SELF_CHECK_TOL {
        return Err(Error::CoarseGrid(format!(
            "halving the step {} moves p_beta({}) by {change:.2e} relative",
            grid.step(),
            grid.last()
        )));
    }
    Ok(coarse)
}

/// `Z_{beta,t}(x) = P^x(T > t) + int_0^t Z_{beta,t-u}(0) f_x(u) du` on the
/// grid of `kernel`, using the first-passage density of `x`.
pub fn partition_at(kernel: &KernelGrid, x: &LatticePoint) -> Result<PartitionCurve> {
    if x.dim() != kernel.dim {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim,
            got: x.dim(),
        });
    }
    let z0 = kernel.partition_curve();
    if x.is_origin() {
        return Ok(z0);
    }
    let fp = first_passage_density(x, &kernel.grid)?;
    let h = kernel.grid.step();
    let f = &fp.density;
    // cell averages of Z(0): zbar[m] = (Z_m + Z_{m+1}) / 2
    let zbar: Vec<f64> = z0.z_values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut z_values = Vec::with_capacity(kernel.grid.len());
    z_values.push(1.0);
    let mut hit = 0.0;
    for n in 1..kernel.grid.len() {
        hit += f[n - 1] * h;
        // cell j (1-based) pairs with zbar[n - j]
        let conv = h * dot_reversed(&f[..n], &zbar[..n]);
        z_values.push(1.0 - hit + conv);
    }
    Ok(PartitionCurve {
        grid: kernel.grid.clone(),
        z_values,
        origin: x.clone(),
    })
}

/// `p_0(., 0, x)` at the Gauss nodes of every cell `[kh, (k+1)h]`, `k < cells`.
fn sampled_free(x: &LatticePoint, h: f64, cells: usize, gl: &GaussLegendre) -> Vec<[f64; CELL_NODES]> {
    let idx: Vec<usize> = x.coords().iter().map(|c| c.unsigned_abs() as usize).collect();
    let mut seq = vec![0.0; x.sup_norm() as usize + 1];
    (0..cells)
        .map(|k| {
            let mut row = [0.0; CELL_NODES];
            for (i, v) in row.iter_mut().enumerate() {
                let t = (k as f64 + 0.5 * (1.0 + gl.nodes[i])) * h;
                scaled_i_seq(2.0 * t, &mut seq);
                *v = idx.iter().map(|&j| seq[j]).product();
            }
            row
        })
        .collect()
}

/// `g(t_m) = int_0^{t_m} p_0(s, x, 0) p_0(t_m - s, 0, y) ds` for `m = 0..=n`.
///
/// The Gauss nodes of cell `k` map onto the mirrored nodes of cell
/// `m - 1 - k`, so the sum is the same for `(x, y)` and `(y, x)`.
fn free_convolution(px: &[[f64; CELL_NODES]], py: &[[f64; CELL_NODES]], h: f64, n: usize, gl: &GaussLegendre) -> Vec<f64> {
    let w: Vec<f64> = gl.weights.iter().map(|w| 0.5 * w * h).collect();
    let mut g = vec![0.0; n + 1];
    for (m, gm) in g.iter_mut().enumerate().skip(1) {
        let mut acc = 0.0;
        for k in 0..m {
            let a = &px[k];
            let b = &py[m - 1 - k];
            for i in 0..CELL_NODES {
                acc += w[i] * a[i] * b[CELL_NODES - 1 - i];
            }
        }
        *gm = acc;
    }
    g
}

/// Off-diagonal pinned kernels `p_beta(t, x, y)` for one `x` and many `y`,
/// at a node `t` of the kernel grid, from
/// `p_beta = p_0(t, x - y) + beta g + beta^2 (p_beta(., 0, 0) * g)(t)`
/// with `g = p_0(., x, 0) * p_0(., 0, y)`. Symmetric in `x` and `y` by
/// construction.
pub fn pinned_kernel_row(kernel: &KernelGrid, t: f64, x: &LatticePoint, ys: &[LatticePoint]) -> Result<Vec<f64>> {
    let d = kernel.dim;
    if x.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.dim() });
    }
    let n = grid_index(&kernel.grid, t)?;
    let h = kernel.grid.step();
    let beta = kernel.beta;
    let gl = GaussLegendre::new(CELL_NODES);
    let px = sampled_free(x, h, n, &gl);
    let mut out = Vec::with_capacity(ys.len());
    for y in ys {
        if y.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: y.dim() });
        }
        if x.is_origin() && y.is_origin() {
            out.push(kernel.pbeta_diag[n]);
            continue;
        }
        let py = if y == x { px.clone() } else { sampled_free(y, h, n, &gl) };
        let g = free_convolution(&px, &py, h, n, &gl);
        // trapezoid for int_0^{t_n} p_beta(s) g(t_n - s) ds; g(0) = 0
        let p = &kernel.pbeta_diag;
        let mut conv = 0.0;
        for j in 0..n {
            conv += p[j] * g[n - j];
        }
        conv -= 0.5 * p[0] * g[n];
        conv *= h;
        let free = free_kernel(kernel.grid.values()[n], &x.sub(y)?)?;
        out.push(free + beta * g[n] + beta * beta * conv);
    }
    Ok(out)
}

pub fn pinned_kernel_offdiag(kernel: &KernelGrid, t: f64, x: &LatticePoint, y: &LatticePoint) -> Result<f64> {
    Ok(pinned_kernel_row(kernel, t, x, std::slice::from_ref(y))?[0])
}

/// Transition density of the ground-state transformed chain,
/// `r(s, x, y) = e^{-lambda_0 s} p_beta(s, x, y) psi(y) / psi(x)`, for many
/// `y`. At `beta_d` the eigenvalue is zero.
pub fn h_transition_row(kernel: &KernelGrid, s: f64, x: &LatticePoint, ys: &[LatticePoint], pair: &EigenPair) -> Result<Vec<f64>> {
    if (kernel.beta - pair.beta).abs() > 1e-12 * pair.beta || kernel.dim != pair.dim() {
        return Err(Error::InvalidArgument(format!(
            "kernel (beta = {}, d = {}) does not match eigenpair (beta = {}, d = {})",
            kernel.beta,
            kernel.dim,
            pair.beta,
            pair.dim()
        )));
    }
    let scale = (-pair.lambda0 * s).exp() / pair.psi(x)?;
    let row = pinned_kernel_row(kernel, s, x, ys)?;
    ys.iter()
        .zip(row)
        .map(|(y, p)| Ok(p * pair.psi(y)? * scale))
        .collect()
}

pub fn h_transition_density(kernel: &KernelGrid, s: f64, x: &LatticePoint, y: &LatticePoint, pair: &EigenPair) -> Result<f64> {
    Ok(h_transition_row(kernel, s, x, std::slice::from_ref(y), pair)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(v: &[i64]) -> LatticePoint {
        LatticePoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn beta_zero_is_free_kernel() {
        let grid = TimeGrid::new(10.0, 0.05).unwrap();
        let k = solve_pinned_diag_unchecked(0.0, &grid, 3).unwrap();
        for (t, v) in grid.values().iter().zip(&k.pbeta_diag) {
            let exact = crate::lattice::free_kernel_diag(*t, 3).unwrap();
            assert!((v - exact).abs() < 1e-14);
        }
        let z = k.partition_curve();
        assert!(z.z_values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn initial_slope_is_generator_diagonal() {
        let h = 1e-3;
        let grid = TimeGrid::new(0.01, h).unwrap();
        let beta = 2.5;
        let k = solve_pinned_diag_unchecked(beta, &grid, 3).unwrap();
        let slope = (k.pbeta_diag[1] - k.pbeta_diag[0]) / h;
        assert!((slope - (beta - 6.0)).abs() < 20.0 * h, "slope={slope}");
        assert!(k.pbeta_diag.iter().zip(&k.p0_diag).all(|(a, b)| a >= b));
    }

    #[test]
    fn d1_closed_form_heat_kernel() {
        // for d = 1 the renewal solution has the Laplace transform
        // 1 / (sqrt(l^2 + 4 l) - beta); beta = 2 gives a pole at l = -2 + sqrt 8
        // with residue lambda-derivative 1 / d/dl sqrt(l^2 + 4 l) = sqrt(l^2+4l) / (l + 2)
        let beta = 2.0;
        let grid = TimeGrid::new(20.0, 0.005).unwrap();
        let k = solve_pinned_diag(beta, &grid, 1).unwrap();
        let l0: f64 = -2.0 + 8f64.sqrt();
        let residue = 2.0 / (l0 + 2.0);
        let t = 20.0;
        let ratio = k.last() / (residue * (l0 * t).exp());
        assert!((ratio - 1.0).abs() < 1e-4, "ratio={ratio}");
    }

    #[test]
    fn second_order_convergence() {
        let beta = 3.0;
        let v: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&h| {
                let g = TimeGrid::new(20.0, h).unwrap();
                solve_pinned_diag_unchecked(beta, &g, 3).unwrap().last()
            })
            .collect();
        let ratio = (v[0] - v[1]) / (v[1] - v[2]);
        assert!((ratio - 4.0).abs() < 0.5, "ratio={ratio}");
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let grid = TimeGrid::new(50.0, 1.0).unwrap();
        assert!(matches!(
            solve_pinned_diag(3.9, &grid, 3),
            Err(Error::CoarseGrid(_))
        ));
    }

    #[test]
    fn partition_matches_semigroup_sum() {
        // Z_t(0) = sum_y p_beta(t, 0, y) over a box large enough for t = 2
        let beta = 2.0;
        let grid = TimeGrid::new(2.0, 0.005).unwrap();
        let k = solve_pinned_diag_unchecked(beta, &grid, 2).unwrap();
        let r = 14i64;
        let mut ys = Vec::new();
        for a in -r..=r {
            for b in -r..=r {
                ys.push(pt(&[a, b]));
            }
        }
        let row = pinned_kernel_row(&k, 2.0, &pt(&[0, 0]), &ys).unwrap();
        let total: f64 = row.iter().sum();
        let z = k.partition_curve().last();
        assert!((total / z - 1.0).abs() < 1e-4, "{total} {z}");
    }

    #[test]
    fn offdiag_symmetric_and_consistent() {
        let grid = TimeGrid::new(5.0, 0.01).unwrap();
        let k = solve_pinned_diag_unchecked(3.0, &grid, 3).unwrap();
        let x = pt(&[1, 0, 0]);
        let y = pt(&[0, 2, -1]);
        let a = pinned_kernel_offdiag(&k, 5.0, &x, &y).unwrap();
        let b = pinned_kernel_offdiag(&k, 5.0, &y, &x).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
        let o = pt(&[0, 0, 0]);
        assert_eq!(pinned_kernel_offdiag(&k, 5.0, &o, &o).unwrap(), k.last());
        // the general formula at x = y = 0 reproduces the renewal solution
        let px = sampled_free(&o, 0.01, 500, &GaussLegendre::new(CELL_NODES));
        let g = free_convolution(&px, &px, 0.01, 500, &GaussLegendre::new(CELL_NODES));
        let mut conv = 0.0;
        for j in 0..500 {
            conv += k.pbeta_diag[j] * g[500 - j];
        }
        conv = (conv - 0.5 * g[500]) * 0.01;
        let general = crate::lattice::free_kernel_diag(5.0, 3).unwrap() + 3.0 * g[500] + 9.0 * conv;
        assert!((general / k.last() - 1.0).abs() < 1e-4);
        assert!(pinned_kernel_offdiag(&k, 5.005, &x, &y).is_err());
    }

    #[test]
    fn partition_at_origin_and_far_away() {
        let grid = TimeGrid::new(10.0, 0.02).unwrap();
        let k = solve_pinned_diag_unchecked(3.0, &grid, 3).unwrap();
        let z0 = partition_at(&k, &pt(&[0, 0, 0])).unwrap();
        assert_eq!(z0.last(), k.partition_curve().last());
        let z1 = partition_at(&k, &pt(&[1, 0, 0])).unwrap();
        let zfar = partition_at(&k, &pt(&[12, 12, 12])).unwrap();
        assert!(z1.last() > 1.0 && z1.last() < z0.last());
        assert!((zfar.last() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn partition_at_matches_kernel_sum() {
        let grid = TimeGrid::new(2.0, 0.005).unwrap();
        let k = solve_pinned_diag_unchecked(2.0, &grid, 2).unwrap();
        let x = pt(&[1, 1]);
        let r = 14i64;
        let mut ys = Vec::new();
        for a in -r..=r {
            for b in -r..=r {
                ys.push(pt(&[a, b]));
            }
        }
        let total: f64 = pinned_kernel_row(&k, 2.0, &x, &ys).unwrap().iter().sum();
        let z = partition_at(&k, &x).unwrap().last();
        assert!((total / z - 1.0).abs() < 1e-3, "{total} {z}");
    }
}
