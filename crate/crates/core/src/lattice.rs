//! Primitives of the free continuous-time simple random walk on `Z^d`
//! with jump rate `2d`: the symbol of `-Delta`, the heat kernel, the free
//! resolvent and first-passage densities.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bessel::{scaled_i, scaled_i_seq};
use crate::error::{Error, Result};
use crate::quadrature::{GaussLegendre, PanelRule};

/// Upper limit of the panel rule when the integrand is not damped by
/// `e^{-lambda t}`; beyond it the local CLT tail is added analytically.
const UNDAMPED_END: f64 = 1e12;
const PANEL_RATIO: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint(Vec<i64>);

impl LatticePoint {
    pub fn new(coords: Vec<i64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::ZeroDimension);
        }
        Ok(Self(coords))
    }

    pub fn origin(d: usize) -> Self {
        Self(vec![0; d.max(1)])
    }

    pub fn unit(d: usize, axis: usize) -> Self {
        let mut c = vec![0; d.max(1)];
        c[axis] = 1;
        Self(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn sup_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn l1_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn euclid_norm(&self) -> f64 {
        (self.0.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt()
    }

    /// Representative under coordinate permutations and sign flips:
    /// absolute values sorted in decreasing order.
    pub fn canonical(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.0.iter().map(|c| c.unsigned_abs() as u32).collect();
        v.sort_unstable_by(|a, b| b.cmp(a));
        v
    }

    pub fn neighbors(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.dim()).flat_map(move |axis| {
            [-1i64, 1].into_iter().map(move |s| {
                let mut c = self.0.clone();
                c[axis] += s;
                LatticePoint(c)
            })
        })
    }

    pub fn sub(&self, other: &LatticePoint) -> Result<LatticePoint> {
        check_dim(other.dim(), self.dim())?;
        Ok(LatticePoint(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        assert!(!v.is_empty(), "lattice points need at least one coordinate");
        Self(v)
    }
}

/// Comma-separated integers, optionally wrapped in `()` or `[]`:
/// `"1,0,-2"`, `"(1, 0, -2)"`.
impl std::str::FromStr for LatticePoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let inner = match (s.chars().next(), s.chars().last()) {
            (Some('('), Some(')')) | (Some('['), Some(']')) if s.len() >= 2 => &s[1..s.len() - 1],
            _ => s,
        };
        if inner.trim().is_empty() {
            return Err(Error::ZeroDimension);
        }
        let coords = inner
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<i64>()
                    .map_err(|e| Error::InvalidArgument(format!("bad coordinate {c:?} in {s:?}: {e}")))
            })
            .collect::<Result<Vec<i64>>>()?;
        Self::new(coords)
    }
}

impl std::fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if let Some(a) = angles.iter().find(|a| !(a.abs() <= PI)) {
            return Err(Error::InvalidArgument(format!(
                "torus angle {a} outside [-pi, pi]"
            )));
        }
        Ok(Self(angles))
    }

    pub fn angles(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Uniform time grid `0, h, 2h, ..., floor(t_max / h) h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_max: f64,
    step: f64,
    values: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_max: f64, step: f64) -> Result<Self> {
        if !(t_max >= 0.0) || !t_max.is_finite() {
            return Err(Error::InvalidArgument(format!("t_max must be >= 0, got {t_max}")));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidArgument(format!("step must be > 0, got {step}")));
        }
        // tolerate t_max / step landing a hair below an integer
        let count = (t_max / step * (1.0 + 1e-12)).floor() as usize + 1;
        let values = (0..count).map(|i| i as f64 * step).collect();
        Ok(Self {
            t_max,
            step,
            values,
        })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Same horizon, half the step.
    pub fn refined(&self) -> TimeGrid {
        TimeGrid::new(self.last(), self.step / 2.0).unwrap()
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `Phi(phi) = 2 sum_j (1 - cos phi_j)`, the symbol of `-Delta`.
pub fn symbol(phi: &TorusPoint, d: usize) -> Result<f64> {
    check_dim(d, phi.dim())?;
    Ok(2.0 * phi.0.iter().map(|a| 1.0 - a.cos()).sum::<f64>())
}

/// `p_0(t, 0, 0) = (e^{-2t} I_0(2t))^d`.
pub fn free_kernel_diag(t: f64, d: usize) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    Ok(scaled_i(0, 2.0 * t).powi(d as i32))
}

/// `p_0(t, 0, x) = prod_j e^{-2t} I_{x_j}(2t)`.
pub fn free_kernel(t: f64, x: &LatticePoint) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let nmax = x.sup_norm() as usize;
    let mut seq = vec![0.0; nmax + 1];
    scaled_i_seq(2.0 * t, &mut seq);
    Ok(x.coords().iter().map(|c| seq[c.unsigned_abs() as usize]).product())
}

/// Panel layout plus the analytic tail for
/// `int_0^inf t^m e^{-lambda t} p_0(t, 0, x) dt`.
#[derive(Debug, Clone)]
pub(crate) struct LaplaceRule {
    pub rule: PanelRule,
    pub lambda: f64,
    pub tail: f64,
}

impl LaplaceRule {
    /// Requires `lambda > 0`, or `lambda = 0` with `d > 2 (m + 1)`.
    pub fn new(lambda: f64, d: usize, moment: u32) -> Self {
        let start = 0.5 / (lambda + 2.0 * d as f64);
        if lambda > 0.0 {
            let end = (60.0 / lambda).max(10.0 * start);
            Self {
                rule: PanelRule::geometric(start, PANEL_RATIO, end),
                lambda,
                tail: 0.0,
            }
        } else {
            let end = UNDAMPED_END;
            let power = 1.0 + moment as f64 - d as f64 / 2.0;
            let tail = (4.0 * PI).powf(-(d as f64) / 2.0) * end.powf(power) / (-power);
            Self {
                rule: PanelRule::geometric(start, PANEL_RATIO, end),
                lambda,
                tail,
            }
        }
    }

    /// Integrates `t^m e^{-lambda t} g(t, seq)` where `seq[k] = e^{-2t} I_k(2t)`.
    pub fn integrate<F>(&self, moment: u32, nmax: usize, mut g: F) -> f64
    where
        F: FnMut(&[f64]) -> f64,
    {
        let mut seq = vec![0.0; nmax + 1];
        let mut acc = 0.0;
        for (&t, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            scaled_i_seq(2.0 * t, &mut seq);
            let damp = (-self.lambda * t).exp() * t.powi(moment as i32);
            if damp == 0.0 {
                continue;
            }
            acc += w * damp * g(&seq);
        }
        acc + self.tail
    }
}

pub(crate) fn validate_resolvent_args(lambda: f64, d: usize, moment: u32) -> Result<()> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    if lambda == 0.0 && d <= 2 * (moment as usize + 1) {
        return Err(Error::Divergent { d, lambda });
    }
    Ok(())
}

/// `R_{0,lambda}(0, x) = int_0^inf e^{-lambda t} p_0(t, 0, x) dt`.
pub fn free_resolvent(lambda: f64, x: &LatticePoint) -> Result<f64> {
    laplace_moment(lambda, x, 0)
}

/// `int_0^inf t^m e^{-lambda t} p_0(t, 0, x) dt`; `m = 1` gives `-d/dlambda R`.
pub fn laplace_moment(lambda: f64, x: &LatticePoint, moment: u32) -> Result<f64> {
    let d = x.dim();
    validate_resolvent_args(lambda, d, moment)?;
    let rule = LaplaceRule::new(lambda, d, moment);
    let idx: Vec<usize> = x.coords().iter().map(|c| c.unsigned_abs() as usize).collect();
    let nmax = x.sup_norm() as usize;
    Ok(rule.integrate(moment, nmax, |seq| idx.iter().map(|&k| seq[k]).product()))
}

/// Tensor trapezoid approximation of
/// `(2 pi)^{-d} int_{T^d} cos<phi, x> / (lambda + Phi(phi)) dphi`
/// on the cell-centred grid (which never samples `phi = 0`).
pub fn resolvent_torus(lambda: f64, x: &LatticePoint, nodes_per_axis: usize) -> Result<f64> {
    let d = x.dim();
    validate_resolvent_args(lambda, d, 0)?;
    if d > 4 {
        return Err(Error::InvalidArgument(
            "tensor torus quadrature is limited to d <= 4".into(),
        ));
    }
    let n = nodes_per_axis;
    let h = 2.0 * PI / n as f64;
    let angles: Vec<f64> = (0..n).map(|k| -PI + (k as f64 + 0.5) * h).collect();
    let axis_symbol: Vec<f64> = angles.iter().map(|a| 2.0 * (1.0 - a.cos())).collect();
    let coords = x.coords();
    let phase: Vec<Vec<f64>> = coords
        .iter()
        .map(|&c| angles.iter().map(|a| (a * c as f64).cos()).collect())
        .collect();
    // cos<phi,x> has only the even part surviving, which factorises as a product of cosines
    let mut sum = 0.0;
    let mut idx = vec![0usize; d];
    loop {
        let mut s = lambda;
        let mut p = 1.0;
        for j in 0..d {
            s += axis_symbol[idx[j]];
            p *= phase[j][idx[j]];
        }
        sum += p / s;
        let mut j = 0;
        loop {
            idx[j] += 1;
            if idx[j] < n {
                break;
            }
            idx[j] = 0;
            j += 1;
            if j == d {
                return Ok(sum / (n as f64).powi(d as i32));
            }
        }
    }
}

/// First-passage density of the free walk from `x` to the origin,
/// piecewise constant on the cells of `grid`.
#[derive(Debug, Clone)]
pub struct FirstPassage {
    pub grid: TimeGrid,
    /// `density[j]` is the value on `(t_j, t_{j+1}]`.
    pub density: Vec<f64>,
    pub dim: usize,
}

impl FirstPassage {
    /// `int_0^{t_max} f_x`.
    pub fn mass_on_grid(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.step()
    }

    /// Cumulative `P^x(T <= t_n)` at every node.
    pub fn cumulative(&self) -> Vec<f64> {
        let h = self.grid.step();
        let mut out = Vec::with_capacity(self.grid.len());
        let mut acc = 0.0;
        out.push(0.0);
        for f in &self.density {
            acc += f * h;
            out.push(acc);
        }
        out
    }

    /// Extrapolated `int_0^inf f_x` using `f(u) ~ A u^{-d/2} (1 + B / u)`
    /// fitted at `t_max / 2` and `t_max`. Only meaningful for `d >= 3`.
    pub fn tail_mass(&self) -> f64 {
        let n = self.density.len();
        if n < 4 || self.dim < 3 {
            return 0.0;
        }
        let h = self.grid.step();
        let s = self.dim as f64 / 2.0;
        let u1 = (n as f64 - 0.5) * h;
        let i0 = n / 2;
        let u0 = (i0 as f64 + 0.5) * h;
        let a1 = self.density[n - 1] * u1.powf(s);
        let a0 = self.density[i0] * u0.powf(s);
        // a(u) = A + A B / u
        let ab = (a0 - a1) / (1.0 / u0 - 1.0 / u1);
        let a = a1 - ab / u1;
        let t = n as f64 * h;
        a * t.powf(1.0 - s) / (s - 1.0) + ab * t.powf(-s) / s
    }

    pub fn total_mass(&self) -> f64 {
        self.mass_on_grid() + self.tail_mass()
    }
}

/// Cell integrals `C_m = int_{(m-1)h}^{mh} p_0(tau, 0, 0) dtau`, `m = 1..=n`.
pub(crate) fn diag_cell_integrals(d: usize, h: f64, n: usize) -> Vec<f64> {
    let gl = GaussLegendre::new(8);
    (1..=n)
        .map(|m| {
            let a = (m - 1) as f64 * h;
            gl.integrate(a, a + h, |t| scaled_i(0, 2.0 * t).powi(d as i32))
        })
        .collect()
}

/// Solves `p_0(t, x, 0) = int_0^t f_x(u) p_0(t - u, 0, 0) du` by forward
/// substitution with `f_x` constant on each cell and the kernel integrated
/// exactly over the cell.
pub fn first_passage_density(x: &LatticePoint, grid: &TimeGrid) -> Result<FirstPassage> {
    if x.is_origin() {
        return Err(Error::StartsAtOrigin);
    }
    let d = x.dim();
    let h = grid.step();
    let n = grid.len() - 1;
    let cells = diag_cell_integrals(d, h, n);
    let target: Vec<f64> = grid
        .values()
        .iter()
        .skip(1)
        .map(|&t| free_kernel(t, x))
        .collect::<Result<_>>()?;
    let density = solve_first_kind(&cells, &target);
    if let Some(worst) = density.iter().cloned().reduce(f64::min) {
        if worst < -1e-8 {
            return Err(Error::CoarseGrid(format!(
                "first-passage density reached {worst:.3e} < -1e-8 with step {h}"
            )));
        }
    }
    Ok(FirstPassage {
        grid: grid.clone(),
        density,
        dim: d,
    })
}

/// `target[n-1] = sum_{j=1}^{n} f_j cells[n-j]`, solved for `f`.
pub(crate) fn solve_first_kind(cells: &[f64], target: &[f64]) -> Vec<f64> {
    let mut f = Vec::with_capacity(target.len());
    for n in 0..target.len() {
        let mut acc = target[n];
        for j in 0..n {
            acc -= f[j] * cells[n - j];
        }
        f.push(acc / cells[0]);
    }
    f
}

/// `max_n |p_0(t_n, x, 0) - (f_x * p_0)(t_n)|` over the grid.
pub fn first_passage_residual(fp: &FirstPassage, x: &LatticePoint) -> Result<f64> {
    let h = fp.grid.step();
    let n = fp.density.len();
    let cells = diag_cell_integrals(fp.dim, h, n);
    let mut worst = 0.0_f64;
    for k in 1..=n {
        let conv: f64 = (1..=k).map(|j| fp.density[j - 1] * cells[k - j]).sum();
        let exact = free_kernel(k as f64 * h, x)?;
        worst = worst.max((conv - exact).abs());
    }
    Ok(worst)
}
