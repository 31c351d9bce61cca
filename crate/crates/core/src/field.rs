//! The ground state `psi_beta(x) = beta R_{0,lambda_0}(0, x)` of
//! `Delta + beta delta_0` and the stationary measure `psi^2 / ||psi||^2`.
//!
//! Fields are invariant under the hyperoctahedral group, so only one value
//! per orbit is stored, keyed by the sorted absolute coordinates.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bessel::scaled_i_seq;
use crate::error::{Error, Result};
use crate::lattice::{laplace_moment, free_resolvent, LaplaceRule, LatticePoint};
use crate::quadrature::GaussLegendre;
use crate::spectral::{critical_beta, lambda0_with};

/// A symmetric function on the box `|x|_inf <= box_radius`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeField {
    pub dim: usize,
    pub box_radius: i64,
    values: BTreeMap<Vec<u32>, f64>,
    /// Decay exponent of the far-field model `|x|^{tail_exponent}`.
    pub tail_exponent: f64,
}

impl LatticeField {
    pub fn get(&self, x: &LatticePoint) -> Option<f64> {
        if x.dim() != self.dim || x.sup_norm() > self.box_radius {
            return None;
        }
        self.values.get(&x.canonical()).copied()
    }

    pub fn value(&self, x: &LatticePoint) -> Result<f64> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        self.get(x).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "{:?} lies outside the stored box of radius {}",
                x.coords(),
                self.box_radius
            ))
        })
    }

    /// One entry per orbit: `(sorted |coords|, value, orbit size)`.
    pub fn orbits(&self) -> impl Iterator<Item = (&[u32], f64, f64)> + '_ {
        self.values
            .iter()
            .map(|(k, &v)| (k.as_slice(), v, orbit_size(k)))
    }

    pub fn orbit_count(&self) -> usize {
        self.values.len()
    }
}

/// Number of lattice points obtained from `rep` by permutations and sign flips.
pub fn orbit_size(rep: &[u32]) -> f64 {
    let d = rep.len();
    let mut size = factorial(d);
    let mut i = 0;
    while i < d {
        let mut j = i;
        while j < d && rep[j] == rep[i] {
            j += 1;
        }
        size /= factorial(j - i);
        i = j;
    }
    let nonzero = rep.iter().filter(|&&c| c != 0).count();
    size * 2f64.powi(nonzero as i32)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Non-increasing sequences of length `d` with entries in `[0, r]`.
pub fn canonical_points(d: usize, r: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for_each_canonical(d, r, |p| out.push(p.to_vec()));
    out
}

/// Visits the same sequences as [`canonical_points`] without storing them.
pub fn for_each_canonical<F: FnMut(&[u32])>(d: usize, r: u32, mut f: F) {
    fn rec<F: FnMut(&[u32])>(d: usize, max: u32, cur: &mut Vec<u32>, f: &mut F) {
        if cur.len() == d {
            f(cur);
            return;
        }
        for v in (0..=max).rev() {
            cur.push(v);
            rec(d, v, cur, f);
            cur.pop();
        }
    }
    let mut cur = Vec::with_capacity(d);
    rec(d, r, &mut cur, &mut f);
}

fn rep_point(rep: &[u32]) -> LatticePoint {
    LatticePoint::from(rep.iter().map(|&c| c as i64).collect::<Vec<_>>())
}

/// `scale * int_0^inf e^{-lambda t} p_0(t, 0, x) dt` for every `x` with
/// `|x|_inf <= radius`, from Bessel sequences cached at every quadrature node.
/// A lookup costs `d` products per node.
#[derive(Debug, Clone)]
pub struct ResolventTable {
    dim: usize,
    radius: u32,
    weights: Vec<f64>,
    seqs: Vec<f64>,
    tail: f64,
    scale: f64,
}

impl ResolventTable {
    pub fn new(lambda: f64, d: usize, radius: u32, scale: f64) -> Self {
        let rule = LaplaceRule::new(lambda, d, 0);
        let width = radius as usize + 1;
        let mut weights = Vec::new();
        let mut seqs = Vec::new();
        let mut seq = vec![0.0; width];
        for (&t, &w) in rule.rule.nodes.iter().zip(&rule.rule.weights) {
            let damp = (-lambda * t).exp();
            if damp == 0.0 {
                continue;
            }
            scaled_i_seq(2.0 * t, &mut seq);
            weights.push(w * damp);
            seqs.extend_from_slice(&seq);
        }
        Self {
            dim: d,
            radius,
            weights,
            seqs,
            tail: rule.tail,
            scale,
        }
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// Value at the orbit representative `rep`, `None` outside the table.
    pub fn value_rep(&self, rep: &[u32]) -> Option<f64> {
        if rep.len() != self.dim || rep.iter().any(|&c| c > self.radius) {
            return None;
        }
        let width = self.radius as usize + 1;
        let mut acc = 0.0;
        for (i, &wd) in self.weights.iter().enumerate() {
            let seq = &self.seqs[i * width..(i + 1) * width];
            let mut p = wd;
            for &c in rep {
                p *= seq[c as usize];
            }
            acc += p;
        }
        Some(self.scale * (acc + self.tail))
    }

    pub fn value(&self, x: &LatticePoint) -> Option<f64> {
        self.value_rep(&x.canonical())
    }
}

fn resolvent_on_box(lambda: f64, d: usize, r: u32, scale: f64) -> BTreeMap<Vec<u32>, f64> {
    let table = ResolventTable::new(lambda, d, r, scale);
    canonical_points(d, r)
        .into_iter()
        .map(|rep| {
            let v = table.value_rep(&rep).unwrap();
            (rep, v)
        })
        .collect()
}

/// Eigenvalue and (generalised) eigenfunction with `psi(0) = 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenPair {
    pub beta: f64,
    pub lambda0: f64,
    pub field: LatticeField,
}

impl EigenPair {
    pub fn dim(&self) -> usize {
        self.field.dim
    }

    /// `psi(x)`, from the stored box or computed directly outside it.
    pub fn psi(&self, x: &LatticePoint) -> Result<f64> {
        if let Some(v) = self.field.get(x) {
            return Ok(v);
        }
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        Ok(self.beta * free_resolvent(self.lambda0, x)?)
    }

    /// Exact `psi` on `|x|_inf <= radius`, consistent bit for bit with the
    /// stored box.
    pub fn table(&self, radius: u32) -> ResolventTable {
        ResolventTable::new(self.lambda0, self.dim(), radius, self.beta)
    }

    /// `||psi||^2 = beta^2 int_0^inf t e^{-lambda_0 t} p_0(t, 0, 0) dt` (Parseval),
    /// infinite for the critical pair in `d <= 4`.
    pub fn parseval_norm_sq(&self) -> Result<f64> {
        let d = self.dim();
        if self.lambda0 == 0.0 && d <= 4 {
            return Err(Error::NotSquareSummable { d, beta: self.beta });
        }
        Ok(self.beta * self.beta * laplace_moment(self.lambda0, &LatticePoint::origin(d), 1)?)
    }

    /// `max |Delta psi + beta delta_0 psi - lambda_0 psi|` over `|x|_inf <= R - 1`.
    pub fn max_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0_f64;
        for (rep, v, _) in self.field.orbits() {
            if rep[0] as i64 >= self.field.box_radius {
                continue;
            }
            let x = rep_point(rep);
            let lap: f64 = x
                .neighbors()
                .map(|y| self.field.get(&y).unwrap())
                .sum::<f64>()
                - 2.0 * d as f64 * v;
            let pin = if x.is_origin() { self.beta * v } else { 0.0 };
            worst = worst.max((lap + pin - self.lambda0 * v).abs());
        }
        worst
    }
}

fn validate_radius(box_radius: i64) -> Result<u32> {
    if !(1..=10_000).contains(&box_radius) {
        return Err(Error::InvalidArgument(format!(
            "box radius must be in 1..=10000, got {box_radius}"
        )));
    }
    Ok(box_radius as u32)
}

fn build_pair(beta: f64, lambda: f64, d: usize, box_radius: i64) -> Result<EigenPair> {
    let r = validate_radius(box_radius)?;
    let values = resolvent_on_box(lambda, d, r, beta);
    Ok(EigenPair {
        beta,
        lambda0: lambda,
        field: LatticeField {
            dim: d,
            box_radius,
            values,
            tail_exponent: if lambda == 0.0 { 2.0 - d as f64 } else { f64::NEG_INFINITY },
        },
    })
}

/// The normalisable ground state for `beta > beta_d`, or `beta = beta_d`
/// with `d >= 5`.
pub fn eigenfunction(beta: f64, d: usize, box_radius: i64) -> Result<EigenPair> {
    let table = critical_beta(d)?;
    let lambda = lambda0_with(&table, beta)?.ok_or(Error::NoEigenvalue { beta, d })?;
    build_pair(beta, lambda, d, box_radius)
}

/// `psi_{beta_d} = beta_d G(0, x)` for any transient `d`. In `d = 3, 4`
/// this is a generalised eigenfunction (bounded, not square summable).
pub fn critical_eigenfunction(d: usize, box_radius: i64) -> Result<EigenPair> {
    let table = critical_beta(d)?;
    if !table.is_transient() {
        return Err(Error::NoEigenvalue { beta: 0.0, d });
    }
    build_pair(table.beta_c, 0.0, d, box_radius)
}

/// `pi(x) = psi(x)^2 / ||psi||^2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryMeasure {
    pub field: LatticeField,
    pub norm_sq: f64,
    /// `sum psi^2` over the box.
    pub box_sum: f64,
    /// Modelled contribution of `|x|_inf > box_radius`.
    pub tail: f64,
}

impl StationaryMeasure {
    pub fn probability(&self, x: &LatticePoint) -> Result<f64> {
        let v = self.field.value(x)?;
        Ok(v * v / self.norm_sq)
    }

    /// `sum_{|x|_inf <= R} pi(x)`.
    pub fn box_mass(&self) -> f64 {
        self.box_sum / self.norm_sq
    }

    /// `sum_{|x|_inf <= r} |x|_2^k pi(x)` for each `r` in `radii`.
    pub fn moment_partial_sums(&self, k: u32, radii: &[i64]) -> Result<Vec<f64>> {
        if let Some(&r) = radii.iter().find(|&&r| r > self.field.box_radius || r < 0) {
            return Err(Error::InvalidArgument(format!(
                "radius {r} outside 0..={}",
                self.field.box_radius
            )));
        }
        let mut sums = vec![0.0; radii.len()];
        for (rep, v, size) in self.field.orbits() {
            let sup = rep[0] as i64;
            let norm: f64 = rep.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt();
            let term = size * norm.powi(k as i32) * v * v / self.norm_sq;
            for (s, &r) in sums.iter_mut().zip(radii) {
                if sup <= r {
                    *s += term;
                }
            }
        }
        Ok(sums)
    }

    /// Growth of the `k`-th moment's partial sums over doubling radii.
    pub fn moment_growth(&self, k: u32, radii: &[i64]) -> Result<MomentGrowth> {
        MomentGrowth::check_radii(radii)?;
        let partial_sums = self.moment_partial_sums(k, radii)?;
        Ok(MomentGrowth::new(k, radii, partial_sums))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentGrowth {
    pub k: u32,
    pub radii: Vec<i64>,
    pub partial_sums: Vec<f64>,
    /// Least-squares factor by which the shell increments grow per doubling
    /// of the radius. A convergent power tail gives a factor below one; a
    /// logarithmic or power divergence keeps it at or above one.
    pub increment_ratio: f64,
}

impl MomentGrowth {
    pub const DIVERGENCE_RATIO: f64 = 0.75;

    pub(crate) fn check_radii(radii: &[i64]) -> Result<()> {
        if radii.len() < 3 || radii[0] < 1 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "moment growth needs at least three increasing positive radii".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn new(k: u32, radii: &[i64], partial_sums: Vec<f64>) -> Self {
        // Fit log(increment) against log2 of the shell's outer radius.
        let pts: Vec<(f64, f64)> = partial_sums
            .windows(2)
            .zip(&radii[1..])
            .map(|(w, &r)| ((r as f64).log2(), (w[1] - w[0]).max(f64::MIN_POSITIVE).ln()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Self {
            k,
            radii: radii.to_vec(),
            partial_sums,
            increment_ratio: (sxy / sxx).exp(),
        }
    }

    pub fn diverges(&self) -> bool {
        self.increment_ratio >= Self::DIVERGENCE_RATIO
    }
}

/// `K_d = int_{|u|_inf > 1} |u|^{-2(d-2)} du = 2d J / (d - 4)` with
/// `J = int_{[-1,1]^{d-1}} (1 + |v|^2)^{-(d-2)} dv`.
fn exterior_constant(d: usize) -> f64 {
    let q = 2.0 * (d as f64 - 2.0);
    let m = d - 1;
    let nodes = if m <= 4 { 16 } else { 10 };
    let gl = GaussLegendre::new(nodes);
    // integrate over [0,1]^m and multiply by 2^m
    let xs: Vec<f64> = gl.nodes.iter().map(|x| 0.5 * (1.0 + x)).collect();
    let ws: Vec<f64> = gl.weights.iter().map(|w| 0.5 * w).collect();
    let mut idx = vec![0usize; m];
    let mut total = 0.0;
    loop {
        let mut r2 = 0.0;
        let mut w = 1.0;
        for &i in &idx {
            r2 += xs[i] * xs[i];
            w *= ws[i];
        }
        total += w * (1.0 + r2).powf(-q / 2.0);
        let mut j = 0;
        loop {
            idx[j] += 1;
            if idx[j] < nodes {
                break;
            }
            idx[j] = 0;
            j += 1;
            if j == m {
                let jint = total * 2f64.powi(m as i32);
                return 2.0 * d as f64 * jint / (d as f64 - 4.0);
            }
        }
    }
}

/// Amplitude `A` of `psi_{beta_d}(x) ~ A |x|^{2-d}` for `d >= 3`.
pub fn far_field_amplitude(beta: f64, d: usize) -> f64 {
    let h = d as f64 / 2.0;
    beta * gamma(h - 1.0) / (4.0 * PI.powf(h))
}

/// Gamma at half-integers and integers, which is all the far field needs.
fn gamma(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    assert!((2.0 * x - twice).abs() < 1e-12 && x > 0.0);
    if twice as i64 % 2 == 0 {
        factorial(x as usize - 1)
    } else {
        // Gamma(n + 1/2) = (2n)! sqrt(pi) / (4^n n!)
        let n = (x - 0.5).round() as usize;
        factorial(2 * n) * PI.sqrt() / (4f64.powi(n as i32) * factorial(n))
    }
}

pub fn stationary_measure(pair: &EigenPair) -> Result<StationaryMeasure> {
    let d = pair.dim();
    if d <= 4 && pair.lambda0 == 0.0 {
        return Err(Error::NotSquareSummable { d, beta: pair.beta });
    }
    let field = &pair.field;
    let r = field.box_radius;
    let mut box_sum = 0.0;
    // shell sums for the geometric tail model
    let mut shells = vec![0.0; r as usize + 1];
    for (rep, v, size) in field.orbits() {
        let s = size * v * v;
        box_sum += s;
        shells[rep[0] as usize] += s;
    }
    let tail = if pair.lambda0 == 0.0 {
        let a = far_field_amplitude(pair.beta, d);
        let rho = r as f64 + 0.5;
        a * a * rho.powf(4.0 - d as f64) * exterior_constant(d)
    } else {
        if r < 2 {
            return Err(Error::InvalidArgument("geometric tail needs box radius >= 2".into()));
        }
        let q = shells[r as usize] / shells[r as usize - 1];
        if !(q < 1.0) {
            return Err(Error::Convergence(format!(
                "shell sums are not decaying at radius {r} (ratio {q:.4})"
            )));
        }
        shells[r as usize] * q / (1.0 - q)
    };
    Ok(StationaryMeasure {
        field: field.clone(),
        norm_sq: box_sum + tail,
        box_sum,
        tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{first_passage_density, resolvent_torus, TimeGrid};

    #[test]
    fn orbit_sizes_count_the_box() {
        for d in 1..=4usize {
            let r = 3u32;
            let total: f64 = canonical_points(d, r).iter().map(|p| orbit_size(p)).sum();
            assert_eq!(total, ((2 * r + 1) as f64).powi(d as i32));
        }
    }

    #[test]
    fn gamma_values() {
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-14);
        assert!((gamma(1.5) - PI.sqrt() / 2.0).abs() < 1e-14);
        assert_eq!(gamma(3.0), 2.0);
    }

    #[test]
    fn exterior_constant_matches_shell_sum() {
        // d = 5: sum over |x|_inf > R of |x|^{-6} against rho^{-1} K
        let d = 5usize;
        let r = 10u32;
        let big = 60u32;
        let mut s = 0.0;
        for_each_canonical(d, big, |rep| {
            if rep[0] > r {
                let n2: f64 = rep.iter().map(|&c| (c * c) as f64).sum();
                s += orbit_size(rep) * n2.powi(-3);
            }
        });
        // far shells beyond `big` from the continuum model
        s += exterior_constant(d) * (big as f64 + 0.5).powi(-1);
        let model = exterior_constant(d) * (r as f64 + 0.5).powi(-1);
        assert!((s / model - 1.0).abs() < 0.01, "{s} {model}");
    }

    #[test]
    fn normalised_at_origin_with_small_residual() {
        let t3 = critical_beta(3).unwrap();
        let pair = eigenfunction(1.3 * t3.beta_c, 3, 8).unwrap();
        assert!((pair.field.get(&LatticePoint::origin(3)).unwrap() - 1.0).abs() < 1e-8);
        assert!(pair.max_residual() < 1e-6);
        let crit = critical_eigenfunction(5, 6).unwrap();
        assert!((crit.psi(&LatticePoint::origin(5)).unwrap() - 1.0).abs() < 1e-8);
        assert!(crit.max_residual() < 1e-6);
    }

    #[test]
    fn no_eigenvalue_below_or_at_critical_in_low_dimension() {
        let t = critical_beta(3).unwrap();
        assert!(matches!(eigenfunction(t.beta_c, 3, 4), Err(Error::NoEigenvalue { .. })));
        assert!(matches!(
            eigenfunction(0.5 * t.beta_c, 3, 4),
            Err(Error::NoEigenvalue { .. })
        ));
        let gen = critical_eigenfunction(3, 4).unwrap();
        assert!(matches!(
            stationary_measure(&gen),
            Err(Error::NotSquareSummable { .. })
        ));
    }

    #[test]
    fn neighbour_value_is_return_probability() {
        let pair = critical_eigenfunction(3, 3).unwrap();
        let psi = pair.psi(&LatticePoint::unit(3, 0)).unwrap();
        let t = critical_beta(3).unwrap();
        assert!((psi - (1.0 - t.escape_prob)).abs() < 1e-9);
        assert!((psi - 0.340_537_33).abs() < 1e-7);
    }

    #[test]
    fn psi_equals_first_passage_mass() {
        let grid = TimeGrid::new(200.0, 0.01).unwrap();
        let pair = critical_eigenfunction(3, 3).unwrap();
        for x in [[1i64, 0, 0], [1, 1, 0], [2, 1, 1]] {
            let x = LatticePoint::from(x.to_vec());
            let fp = first_passage_density(&x, &grid).unwrap();
            let psi = pair.psi(&x).unwrap();
            assert!((fp.total_mass() - psi).abs() < 1e-4, "{x:?}");
        }
    }

    #[test]
    fn fourier_route_agrees() {
        let t3 = critical_beta(3).unwrap();
        let beta = 1.2 * t3.beta_c;
        let pair = eigenfunction(beta, 3, 3).unwrap();
        for x in [[0i64, 0, 0], [1, 0, 0], [2, 1, 0], [3, 3, 1]] {
            let x = LatticePoint::from(x.to_vec());
            let torus = beta * resolvent_torus(pair.lambda0, &x, 256).unwrap();
            assert!((torus - pair.psi(&x).unwrap()).abs() < 1e-8, "{x:?}");
        }
    }

    #[test]
    fn outside_box_values_are_exact() {
        let pair = critical_eigenfunction(5, 2).unwrap();
        let big = critical_eigenfunction(5, 4).unwrap();
        let x = LatticePoint::from(vec![4, -1, 0, 0, 3]);
        assert!(pair.field.get(&x).is_none());
        assert!((pair.psi(&x).unwrap() - big.psi(&x).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn green_function_decay_exponent() {
        let pair = critical_eigenfunction(5, 16).unwrap();
        let at = |r: i64| pair.psi(&LatticePoint::from(vec![r, 0, 0, 0, 0])).unwrap();
        let slope = (at(9).ln() - at(7).ln()) / (9f64.ln() - 7f64.ln());
        assert!((slope / -3.0 - 1.0).abs() < 0.05, "slope={slope}");
        let a = far_field_amplitude(pair.beta, 5);
        assert!((at(16) / (a * 16f64.powi(-3)) - 1.0).abs() < 0.01);
    }

    #[test]
    fn stationary_norm_matches_parseval() {
        let pair = critical_eigenfunction(5, 12).unwrap();
        let m = stationary_measure(&pair).unwrap();
        let exact = pair.parseval_norm_sq().unwrap();
        assert!((m.norm_sq / exact - 1.0).abs() < 1e-3, "{} {exact}", m.norm_sq);
        assert!(m.box_mass() < 1.0);
        let t3 = critical_beta(3).unwrap();
        let sup = eigenfunction(1.5 * t3.beta_c, 3, 12).unwrap();
        let ms = stationary_measure(&sup).unwrap();
        assert!((ms.norm_sq / sup.parseval_norm_sq().unwrap() - 1.0).abs() < 1e-6);
    }
}
