use serde::{Deserialize, Serialize};

use super::ensemble::WeightedEnsemble;
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

pub const DEFAULT_ESS_FLOOR: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableOptions {
    pub ess_floor: f64,
    /// Histogram bins on `[0, 1]` for `sigma_t / t`.
    pub bins: usize,
    /// Largest `|phi|` of the characteristic-function grid.
    pub phi_max: f64,
    pub phi_step: f64,
}

impl Default for ObservableOptions {
    fn default() -> Self {
        Self {
            ess_floor: DEFAULT_ESS_FLOOR,
            bins: 20,
            phi_max: 3.0,
            phi_step: 0.1,
        }
    }
}

fn check_ess(ens: &WeightedEnsemble, floor: f64) -> Result<()> {
    if !(ens.ess >= floor) {
        return Err(Error::LowEss { ess: ens.ess, floor });
    }
    Ok(())
}

/// Limit CDF of `sigma_t / t`: `sqrt(u)` in `d = 3`, `u` in `d = 4`.
pub fn sigma_limit_cdf(d: usize, u: f64) -> Result<f64> {
    let u = u.clamp(0.0, 1.0);
    match d {
        3 => Ok(u.sqrt()),
        4 => Ok(u),
        _ => Err(Error::InvalidArgument(format!(
            "limit law of sigma_t / t is only available for d = 3, 4 (got {d})"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaBin {
    pub u_lo: f64,
    pub u_hi: f64,
    pub weighted_density: f64,
    pub limit_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaReport {
    pub dim: usize,
    pub horizon: f64,
    pub ess: f64,
    pub mean: f64,
    /// Weighted Kolmogorov-Smirnov distance to the limit CDF.
    pub ks: f64,
    pub bins: Vec<SigmaBin>,
}

/// Weighted empirical law of `sigma_t / t` against its limit.
pub fn sigma_distribution(ens: &WeightedEnsemble) -> Result<SigmaReport> {
    sigma_distribution_with(ens, &ObservableOptions::default())
}

pub fn sigma_distribution_with(ens: &WeightedEnsemble, opts: &ObservableOptions) -> Result<SigmaReport> {
    let d = ens.dim;
    sigma_limit_cdf(d, 0.5)?;
    check_ess(ens, opts.ess_floor)?;
    if opts.bins == 0 {
        return Err(Error::InvalidArgument("need at least one bin".into()));
    }
    let t = ens.horizon;
    let mut pts: Vec<(f64, f64)> = ens
        .samples
        .iter()
        .map(|s| ((s.last_visit / t).clamp(0.0, 1.0), s.weight))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pts.iter().map(|p| p.1).sum();

    let mut ks = 0.0_f64;
    let mut cum = 0.0;
    let mut mean = 0.0;
    let mut i = 0;
    while i < pts.len() {
        let u = pts[i].0;
        let g = sigma_limit_cdf(d, u)?;
        ks = ks.max((cum / total - g).abs());
        while i < pts.len() && pts[i].0 == u {
            cum += pts[i].1;
            mean += pts[i].1 * u;
            i += 1;
        }
        ks = ks.max((cum / total - g).abs());
    }
    mean /= total;

    let nb = opts.bins;
    let width = 1.0 / nb as f64;
    let mut mass = vec![0.0; nb];
    for &(u, w) in &pts {
        let b = ((u / width) as usize).min(nb - 1);
        mass[b] += w;
    }
    let mut bins = Vec::with_capacity(nb);
    for (b, m) in mass.into_iter().enumerate() {
        let lo = b as f64 * width;
        let hi = lo + width;
        bins.push(SigmaBin {
            u_lo: lo,
            u_hi: hi,
            weighted_density: m / total / width,
            limit_density: (sigma_limit_cdf(d, hi)? - sigma_limit_cdf(d, lo)?) / width,
        });
    }
    Ok(SigmaReport {
        dim: d,
        horizon: t,
        ess: ens.ess,
        mean,
        ks,
        bins,
    })
}

/// Characteristic function of the Gaussian mixture limit of `x_t / sqrt(t)`:
/// `E exp(-|phi|^2 (1 - U))` with `U` the limit of `sigma_t / t`. For this
/// walk the free variance per coordinate is `2t`, which is what makes the
/// exponent `|phi|^2 (1 - u)` rather than `|phi|^2 (1 - u) / 2`.
pub fn mixture_cf(d: usize, phi_norm: f64) -> Result<f64> {
    let s = phi_norm * phi_norm;
    match d {
        // (1/2) int_0^1 e^{-s(1-u)} u^{-1/2} du = int_0^1 e^{-s(1-v^2)} dv
        3 => Ok(GaussLegendre::new(40).integrate(0.0, 1.0, |v| (-s * (1.0 - v * v)).exp())),
        4 => Ok(if s < 1e-8 { 1.0 - s / 2.0 } else { -(-s).exp_m1() / s }),
        _ => Err(Error::InvalidArgument(format!(
            "mixture limit is only available for d = 3, 4 (got {d})"
        ))),
    }
}

/// Limit of `E <zeta, x_t>^2 / (|zeta|^2 t)`: `2 E(1 - U)`.
pub fn mixture_variance_ratio(d: usize) -> Result<f64> {
    match d {
        3 => Ok(4.0 / 3.0),
        4 => Ok(1.0),
        _ => Err(Error::InvalidArgument(format!(
            "mixture limit is only available for d = 3, 4 (got {d})"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfRow {
    /// Unit direction of `phi`.
    pub direction: Vec<f64>,
    pub phi_norm: f64,
    pub ecf_real: f64,
    pub ecf_imag: f64,
    pub limit_cf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointReport {
    pub dim: usize,
    pub horizon: f64,
    pub ess: f64,
    /// `E <zeta, x_t>^2 / (|zeta|^2 t)`.
    pub variance_ratio: f64,
    /// The same ratio divided by the free per-coordinate variance rate 2.
    pub normalized_variance_ratio: f64,
    /// `Cov(x_t) / t`.
    pub covariance: Vec<Vec<f64>>,
    pub max_offdiag: f64,
    pub cf: Vec<CfRow>,
    /// `sup |ecf - limit|` over the grid, using the complex modulus.
    pub cf_sup_error: f64,
}

/// Weighted second moments and characteristic function of `x_t / sqrt(t)`.
/// The characteristic function is tabulated along a coordinate axis and the
/// main diagonal.
pub fn endpoint_statistics(ens: &WeightedEnsemble, zeta: &[f64]) -> Result<EndpointReport> {
    endpoint_statistics_with(ens, zeta, &ObservableOptions::default())
}

pub fn endpoint_statistics_with(
    ens: &WeightedEnsemble,
    zeta: &[f64],
    opts: &ObservableOptions,
) -> Result<EndpointReport> {
    let d = ens.dim;
    if zeta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: zeta.len(),
        });
    }
    let z2: f64 = zeta.iter().map(|z| z * z).sum();
    if !(z2 > 0.0) || !z2.is_finite() {
        return Err(Error::InvalidArgument("zeta must be a non-zero finite vector".into()));
    }
    if !(opts.phi_step > 0.0) || !(opts.phi_max >= 0.0) {
        return Err(Error::InvalidArgument("phi grid needs a positive step".into()));
    }
    check_ess(ens, opts.ess_floor)?;
    let t = ens.horizon;
    let total: f64 = ens.samples.iter().map(|s| s.weight).sum();

    let mut proj = 0.0;
    let mut mean = vec![0.0; d];
    let mut second = vec![vec![0.0; d]; d];
    for s in &ens.samples {
        let x = s.endpoint.coords();
        let p: f64 = x.iter().zip(zeta).map(|(&a, z)| a as f64 * z).sum();
        proj += s.weight * p * p;
        for i in 0..d {
            mean[i] += s.weight * x[i] as f64;
            for j in 0..d {
                second[i][j] += s.weight * (x[i] * x[j]) as f64;
            }
        }
    }
    let variance_ratio = proj / total / (z2 * t);
    let mut covariance = vec![vec![0.0; d]; d];
    let mut max_offdiag = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            let c = (second[i][j] / total - mean[i] * mean[j] / (total * total)) / t;
            covariance[i][j] = c;
            if i != j {
                max_offdiag = max_offdiag.max(c.abs());
            }
        }
    }

    let steps = (opts.phi_max / opts.phi_step + 1e-9).floor() as usize;
    let axis: Vec<f64> = (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
    let diag = vec![1.0 / (d as f64).sqrt(); d];
    let scaled: Vec<Vec<f64>> = ens
        .samples
        .iter()
        .map(|s| s.endpoint.coords().iter().map(|&c| c as f64 / t.sqrt()).collect())
        .collect();
    let mut cf = Vec::new();
    let mut cf_sup_error = 0.0_f64;
    for dir in [axis, diag] {
        let proj: Vec<f64> = scaled
            .iter()
            .map(|x| x.iter().zip(&dir).map(|(a, b)| a * b).sum())
            .collect();
        for k in 0..=steps {
            let r = k as f64 * opts.phi_step;
            let (mut re, mut im) = (0.0, 0.0);
            for (s, &p) in ens.samples.iter().zip(&proj) {
                let (sn, cs) = (r * p).sin_cos();
                re += s.weight * cs;
                im += s.weight * sn;
            }
            re /= total;
            im /= total;
            let limit = mixture_cf(d, r)?;
            cf_sup_error = cf_sup_error.max((re - limit).hypot(im));
            cf.push(CfRow {
                direction: dir.clone(),
                phi_norm: r,
                ecf_real: re,
                ecf_imag: im,
                limit_cf: limit,
            });
        }
    }
    Ok(EndpointReport {
        dim: d,
        horizon: t,
        ess: ens.ess,
        variance_ratio,
        normalized_variance_ratio: variance_ratio / 2.0,
        covariance,
        max_offdiag,
        cf,
        cf_sup_error,
    })
}
