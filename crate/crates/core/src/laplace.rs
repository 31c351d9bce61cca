//! Numerical inverse Laplace transform of
//! `R_{beta,lambda}(0,0) = I(lambda) / (1 - beta I(lambda))` and of
//! `Z^(lambda) = (1 + beta R_{beta,lambda}(0,0)) / lambda`.
//!
//! `I` is continued to complex `lambda` by integrating along the ray
//! `t = tau e^{-i arg(lambda) / 2}`, on which `e^{-lambda t}` decays like
//! `e^{-|lambda| cos(arg/2) tau}` and `e^{-t} I_0(t)` stays bounded. The
//! inversion uses the cotangent contour of Weideman and Trefethen.

use num_complex::Complex64;

use crate::bessel::scaled_i0_complex;
use crate::error::{Error, Result};
use crate::quadrature::PanelRule;
use crate::spectral::{critical_beta, i_lambda_derivative, lambda0_with, SpectralTable};

/// Default contour node count; the check re-runs with a third more.
///
/// The contour sum amplifies rounding in `F` by about `e^{0.17 n}`, so
/// doubling to 48 or more nodes measures rounding rather than truncation
/// once `f(t)` is small compared with `F`.
pub const DEFAULT_NODES: usize = 24;
/// Relative agreement required between `n` and `4n/3` nodes.
pub const NODE_CHECK_TOL: f64 = 1e-8;
const RAY_PANEL_RATIO: f64 = 1.1;

/// `I(lambda)` for complex `lambda` off the cut `(-inf, 0]`.
pub fn i_lambda_complex(lambda: Complex64, d: usize) -> Result<Complex64> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    let alpha = lambda.arg();
    if lambda.norm() == 0.0 || alpha.abs() >= std::f64::consts::PI - 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "lambda = {lambda} lies on the cut (-inf, 0]"
        )));
    }
    let dir = Complex64::from_polar(1.0, -alpha / 2.0);
    let decay = lambda.norm() * (alpha / 2.0).cos();
    let start = 0.5 / (lambda.norm() + 2.0 * d as f64);
    let end = (60.0 / decay).max(10.0 * start);
    let rule = PanelRule::geometric(start, RAY_PANEL_RATIO, end);
    let mut acc = Complex64::new(0.0, 0.0);
    for (&tau, &w) in rule.nodes.iter().zip(&rule.weights) {
        let t = dir * tau;
        let g = scaled_i0_complex(2.0 * t);
        acc += w * (-lambda * t).exp() * g.powu(d as u32);
    }
    Ok(acc * dir)
}

/// Weideman-Trefethen cotangent contour with `nodes` points (even).
pub fn talbot<F>(t: f64, nodes: usize, mut f: F) -> Result<f64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("inverse Laplace needs t > 0, got {t}")));
    }
    if nodes < 2 || nodes % 2 == 1 {
        return Err(Error::InvalidArgument(format!("node count must be even, got {nodes}")));
    }
    let (sigma, mu, nu, a) = (-0.6122, 0.5017, 0.2645, 0.6407);
    let scale = nodes as f64 / t;
    let mut acc = 0.0;
    // conjugate symmetry: only theta > 0, doubled
    for k in 0..nodes / 2 {
        let theta = (2 * k + 1) as f64 * std::f64::consts::PI / nodes as f64;
        let cot = 1.0 / (a * theta).tan();
        let z = scale * Complex64::new(sigma + mu * theta * cot, nu * theta);
        let sin = (a * theta).sin();
        let dz = scale * Complex64::new(mu * (cot - a * theta / (sin * sin)), nu);
        acc += ((z * t).exp() * f(z)? * dz).im;
    }
    Ok(2.0 * acc / nodes as f64)
}

/// Runs [`talbot`] with `nodes` and about `4 nodes / 3` and requires
/// agreement relative to `max(|f(t)|, offset)`, where `offset` is any
/// exactly known part added to the inverted value afterwards.
pub fn talbot_checked<F>(t: f64, nodes: usize, offset: f64, mut f: F) -> Result<f64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    let more = (nodes * 4 / 3 + 1) & !1;
    let a = talbot(t, nodes, &mut f)?;
    let b = talbot(t, more, &mut f)?;
    let rel = (a - b).abs() / b.abs().max(offset.abs()).max(f64::MIN_POSITIVE);
    if rel > NODE_CHECK_TOL {
        return Err(Error::Convergence(format!(
            "contour with {nodes} and {more} nodes differ by {rel:.2e} relative at t = {t}"
        )));
    }
    Ok(b)
}

/// `R_{beta,lambda}(0,0)` at complex `lambda`, written for `d >= 3` as
/// `I / ((1 - beta I(0)) + beta (I(0) - I))` so that the critical case
/// loses no digits.
pub fn pinned_resolvent_complex(table: &SpectralTable, beta: f64, lambda: Complex64) -> Result<Complex64> {
    let i = i_lambda_complex(lambda, table.dim)?;
    let denom = match table.i0 {
        Some(i0) => (1.0 - beta * i0) + beta * (i0 - i),
        None => 1.0 - beta * i,
    };
    Ok(i / denom)
}

/// Pole of `R_{beta,lambda}(0,0)` at `lambda_0 > 0` and its residue
/// `-1 / (beta^2 I'(lambda_0))`.
fn pole(table: &SpectralTable, beta: f64) -> Result<Option<(f64, f64)>> {
    match lambda0_with(table, beta)? {
        Some(l0) if l0 > 0.0 => {
            let slope = i_lambda_derivative(l0, table.dim)?;
            Ok(Some((l0, -1.0 / (beta * beta * slope))))
        }
        _ => Ok(None),
    }
}

fn validate(beta: f64, t: f64) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be >= 0, got {beta}")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("t must be > 0, got {t}")));
    }
    Ok(())
}

/// `p_beta(t, 0, 0)` by contour inversion; for `beta > beta_d` the
/// eigenvalue pole is removed first and added back as `Res e^{lambda_0 t}`.
pub fn inverse_laplace_diag(beta: f64, t: f64, d: usize) -> Result<f64> {
    inverse_laplace_diag_with(beta, t, d, DEFAULT_NODES)
}

pub fn inverse_laplace_diag_with(beta: f64, t: f64, d: usize, nodes: usize) -> Result<f64> {
    validate(beta, t)?;
    let table = critical_beta(d)?;
    let pole = pole(&table, beta)?;
    let exact = pole.map_or(0.0, |(l0, res)| res * (l0 * t).exp());
    let smooth = talbot_checked(t, nodes, exact, |z| {
        let r = pinned_resolvent_complex(&table, beta, z)?;
        Ok(match pole {
            Some((l0, res)) => r - res / (z - l0),
            None => r,
        })
    })?;
    Ok(smooth + exact)
}

/// `Z_{beta,t}(0)` by contour inversion of `(1 + beta R_{beta,lambda}) / lambda`.
pub fn inverse_laplace_partition(beta: f64, t: f64, d: usize) -> Result<f64> {
    inverse_laplace_partition_with(beta, t, d, DEFAULT_NODES)
}

pub fn inverse_laplace_partition_with(beta: f64, t: f64, d: usize, nodes: usize) -> Result<f64> {
    validate(beta, t)?;
    let table = critical_beta(d)?;
    let pole = pole(&table, beta)?.map(|(l0, res)| (l0, beta * res / l0));
    let exact = pole.map_or(0.0, |(l0, res)| res * (l0 * t).exp());
    let smooth = talbot_checked(t, nodes, exact, |z| {
        let r = pinned_resolvent_complex(&table, beta, z)?;
        let zhat = (1.0 + beta * r) / z;
        Ok(match pole {
            Some((l0, res)) => zhat - res / (z - l0),
            None => zhat,
        })
    })?;
    Ok(smooth + exact)
}
