//! Quantities derived from the diagonal free resolvent
//! `I(lambda) = (2 pi)^{-d} int_{T^d} dphi / (lambda + Phi(phi))`:
//! the critical coupling, the bound-state energy and the small-`lambda`
//! expansion of `I(0) - I(lambda)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bessel::scaled_i_seq;
use crate::error::{Error, Result};
use crate::lattice::{laplace_moment, validate_resolvent_args, LaplaceRule, LatticePoint};

/// `I(lambda)` through `int_0^inf e^{-lambda t} (e^{-2t} I_0(2t))^d dt`.
pub fn i_lambda(lambda: f64, d: usize) -> Result<f64> {
    laplace_moment(lambda, &LatticePoint::origin(d), 0)
}

/// `I'(lambda) = -int_0^inf t e^{-lambda t} p_0(t) dt`; finite at zero only for `d >= 5`.
pub fn i_lambda_derivative(lambda: f64, d: usize) -> Result<f64> {
    Ok(-laplace_moment(lambda, &LatticePoint::origin(d), 1)?)
}

/// `I(0) - I(lambda) = int_0^inf (1 - e^{-lambda t}) p_0(t) dt` for `d >= 3`,
/// integrated directly so that no cancellation occurs for small `lambda`.
pub fn i_deficit(lambda: f64, d: usize) -> Result<f64> {
    if d < 3 {
        return Err(Error::Divergent { d, lambda: 0.0 });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    if lambda < 1e-10 {
        // the undamped panel rule stops at 1e12
        return Ok(i_lambda(0.0, d)? - i_lambda(lambda, d)?);
    }
    // undamped layout; (1 - e^{-lambda t}) is 1 to rounding at the panel end
    let rule = LaplaceRule::new(0.0, d, 0);
    let mut acc = 0.0;
    let mut seq = [0.0];
    for (&t, &w) in rule.rule.nodes.iter().zip(&rule.rule.weights) {
        scaled_i_seq(2.0 * t, &mut seq);
        acc += w * (-(-lambda * t).exp_m1()) * seq[0].powi(d as i32);
    }
    Ok(acc + rule.tail)
}

/// Critical coupling and the constants of the critical asymptotics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralTable {
    pub dim: usize,
    /// `I(0)`; `None` when it is infinite (`d <= 2`).
    pub i0: Option<f64>,
    /// `beta_d = 1 / I(0)`, zero in recurrent dimensions.
    pub beta_c: f64,
    /// `e_d = beta_d / (2d)`, the probability of never returning.
    pub escape_prob: f64,
    /// Heat-kernel constant as conventionally stated: `8 sqrt(pi) / beta_3^2`,
    /// `8 pi / beta_4^2`, and `1 / (beta_d^2 kappa_d)` for `d >= 5`.
    pub c_d: Option<f64>,
    /// Partition constant as conventionally stated: `16 sqrt(pi) / beta_3`,
    /// `8 pi / beta_4`, `c_d beta_d`.
    pub d_d: Option<f64>,
    /// Limit actually attained by `sqrt(t) p`, `ln(t) p` or `p` itself
    /// (`d >= 5`): `4 sqrt(pi) / beta_3^2`, `16 pi^2 / beta_4^2`, `c_d`.
    pub heat_kernel_constant: Option<f64>,
    /// Limit of `Z / sqrt(t)`, `Z ln(t) / t` or `Z / t`:
    /// `8 sqrt(pi) / beta_3`, `16 pi^2 / beta_4`, `d_d`.
    pub partition_constant: Option<f64>,
    /// `lim (I(0) - I(lambda)) / lambda` for `d >= 5`, Richardson-fitted.
    pub resolvent_slope: Option<f64>,
}

impl SpectralTable {
    pub fn is_transient(&self) -> bool {
        self.i0.is_some()
    }

    /// True when `beta` equals the critical coupling up to rounding.
    pub fn is_critical(&self, beta: f64) -> bool {
        self.is_transient() && (beta - self.beta_c).abs() <= 1e-12 * self.beta_c
    }
}

pub fn critical_beta(d: usize) -> Result<SpectralTable> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    if d <= 2 {
        return Ok(SpectralTable {
            dim: d,
            i0: None,
            beta_c: 0.0,
            escape_prob: 0.0,
            c_d: None,
            d_d: None,
            heat_kernel_constant: None,
            partition_constant: None,
            resolvent_slope: None,
        });
    }
    let i0 = i_lambda(0.0, d)?;
    let beta = 1.0 / i0;
    let (c_d, d_d, heat, part, slope) = match d {
        3 => (
            8.0 * PI.sqrt() / (beta * beta),
            16.0 * PI.sqrt() / beta,
            4.0 * PI.sqrt() / (beta * beta),
            8.0 * PI.sqrt() / beta,
            None,
        ),
        4 => (
            8.0 * PI / (beta * beta),
            8.0 * PI / beta,
            16.0 * PI * PI / (beta * beta),
            16.0 * PI * PI / beta,
            None,
        ),
        _ => {
            let slope = fitted_resolvent_slope(d)?;
            let c = 1.0 / (beta * beta * slope);
            (c, c * beta, c, c * beta, Some(slope))
        }
    };
    Ok(SpectralTable {
        dim: d,
        i0: Some(i0),
        beta_c: beta,
        escape_prob: beta / (2.0 * d as f64),
        c_d: Some(c_d),
        d_d: Some(d_d),
        heat_kernel_constant: Some(heat),
        partition_constant: Some(part),
        resolvent_slope: slope,
    })
}

/// Richardson combination of `(I(0) - I(lambda)) / lambda` at `1e-3` and
/// `1e-4`, eliminating the leading correction `lambda^p` with
/// `p = 1/2` for `d = 5` and `p = 1` above.
pub fn fitted_resolvent_slope(d: usize) -> Result<f64> {
    if d < 5 {
        return Err(Error::InvalidArgument(format!(
            "(I(0) - I(lambda)) / lambda has no finite limit in d = {d}"
        )));
    }
    let (l1, l2) = (1e-3, 1e-4);
    let g1 = i_deficit(l1, d)? / l1;
    let g2 = i_deficit(l2, d)? / l2;
    let p = if d == 5 { 0.5 } else { 1.0 };
    let r = (l1 / l2).powf(p);
    Ok((r * g2 - g1) / (r - 1.0))
}

/// Root of `I(lambda) = 1 / beta` when it exists.
///
/// Returns `None` when `beta <= beta_d` except at `beta = beta_d` with
/// `d >= 5`, where the bottom of the continuous spectrum is an eigenvalue.
pub fn lambda0(beta: f64, d: usize) -> Result<Option<f64>> {
    let table = critical_beta(d)?;
    lambda0_with(&table, beta)
}

pub fn lambda0_with(table: &SpectralTable, beta: f64) -> Result<Option<f64>> {
    let d = table.dim;
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be >= 0, got {beta}")));
    }
    if beta == 0.0 {
        return Ok(None);
    }
    if table.is_critical(beta) {
        return Ok(if d >= 5 { Some(0.0) } else { None });
    }
    if beta < table.beta_c {
        return Ok(None);
    }
    let target = 1.0 / beta;
    let mut lo = 0.0_f64;
    let mut hi = 4.0 * d as f64 + beta;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        // I is strictly decreasing: I(mid) > 1/beta means the root lies above
        let value = i_lambda(mid, d)?;
        if value > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticRow {
    pub lambda: f64,
    /// `I(0) - I(lambda)`
    pub deficit: f64,
    /// Leading term: `sqrt(lambda) / (4 pi)`, `lambda ln(1/lambda) / (16 pi^2)`
    /// or `kappa lambda`
    pub predicted: f64,
    pub ratio: f64,
}

/// Compares `I(0) - I(lambda)` with its leading small-`lambda` term.
pub fn asymptotic_expansion_check(d: usize, lambdas: &[f64]) -> Result<Vec<AsymptoticRow>> {
    validate_resolvent_args(0.0, d, 0)?;
    let slope = if d >= 5 {
        Some(fitted_resolvent_slope(d)?)
    } else {
        None
    };
    lambdas
        .iter()
        .map(|&lambda| {
            if !(0.0..=0.1).contains(&lambda) {
                return Err(Error::InvalidArgument(format!(
                    "asymptotic check needs lambda in [0, 0.1], got {lambda}"
                )));
            }
            if lambda == 0.0 {
                return Ok(AsymptoticRow {
                    lambda,
                    deficit: 0.0,
                    predicted: 0.0,
                    ratio: 1.0,
                });
            }
            let deficit = i_deficit(lambda, d)?;
            let predicted = match d {
                3 => lambda.sqrt() / (4.0 * PI),
                4 => lambda * (1.0 / lambda).ln() / (16.0 * PI * PI),
                _ => slope.unwrap() * lambda,
            };
            Ok(AsymptoticRow {
                lambda,
                deficit,
                predicted,
                ratio: deficit / predicted,
            })
        })
        .collect()
}
