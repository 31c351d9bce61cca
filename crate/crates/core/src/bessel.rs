//! Exponentially scaled modified Bessel functions of the first kind,
//! `e^{-z} I_n(z)`.
//!
//! Real arguments use Miller's backward recurrence normalised with
//! `e^{-z} (I_0 + 2 sum_k I_k) = 1`, switching to the Hankel asymptotic
//! series once `z` is large compared with `n^2`. The scaling keeps every
//! value in `[0, 1]`, so kernels at `t = 10^6` and beyond never overflow.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Below this the complex evaluator uses the periodic trapezoid rule.
const COMPLEX_SERIES_RADIUS: f64 = 20.0;
const TRAPEZOID_NODES: usize = 64;
const RESCALE_LIMIT: f64 = 1e250;

fn hankel_threshold(n: usize) -> f64 {
    40.0 + (n * n) as f64
}

/// `e^{-z} I_n(z)` for `z >= 0`.
pub fn scaled_i(n: usize, z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if z >= hankel_threshold(n) {
        return hankel_real(n, z);
    }
    let mut out = vec![0.0; n + 1];
    miller(n, z, &mut out);
    out[n]
}

/// Fills `out[k] = e^{-z} I_k(z)` for `k = 0..out.len()`.
pub fn scaled_i_seq(z: f64, out: &mut [f64]) {
    debug_assert!(z >= 0.0);
    if out.is_empty() {
        return;
    }
    let nmax = out.len() - 1;
    if z == 0.0 {
        out.fill(0.0);
        out[0] = 1.0;
        return;
    }
    if z >= hankel_threshold(nmax) {
        for (k, v) in out.iter_mut().enumerate() {
            *v = hankel_real(k, z);
        }
    } else {
        miller(nmax, z, out);
    }
}

fn miller(nmax: usize, z: f64, out: &mut [f64]) {
    let start = nmax + 20 + (80.0 * z).sqrt().ceil() as usize;
    let mut above = 0.0_f64;
    let mut current = 1e-30_f64;
    // sum accumulates f_0 + 2 * sum_{k>=1} f_k
    let mut sum = 0.0_f64;
    for k in (1..=start).rev() {
        if k <= nmax {
            out[k] = current;
        }
        sum += 2.0 * current;
        let below = above + (2.0 * k as f64 / z) * current;
        above = current;
        current = below;
        if current.abs() > RESCALE_LIMIT {
            let s = 1.0 / RESCALE_LIMIT;
            current *= s;
            above *= s;
            sum *= s;
            for v in out.iter_mut().take(nmax + 1).skip(k.min(nmax + 1)) {
                *v *= s;
            }
        }
    }
    out[0] = current;
    sum += current;
    for v in out.iter_mut().take(nmax + 1) {
        *v /= sum;
    }
}

fn hankel_real(n: usize, z: f64) -> f64 {
    let mu = 4.0 * (n * n) as f64;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 1..400 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * z);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * z).sqrt()
}

/// `e^{-z} I_0(z)` for complex `z` with `Re z >= 0`.
///
/// Small arguments use the trapezoid rule on
/// `(1/pi) int_0^pi e^{-z (1 - cos th)} dth`, which is spectrally accurate;
/// large arguments use the Hankel expansion including the recessive
/// exponential, whose sign follows the half-plane of `Im z`.
pub fn scaled_i0_complex(z: Complex64) -> Complex64 {
    debug_assert!(z.re >= -1e-12);
    if z.norm() < COMPLEX_SERIES_RADIUS {
        trapezoid_i0(z)
    } else {
        hankel_i0(z)
    }
}

fn trapezoid_i0(z: Complex64) -> Complex64 {
    let m = TRAPEZOID_NODES;
    let mut sum = Complex64::new(1.0, 0.0) + (-2.0 * z).exp();
    for k in 1..m / 2 {
        let c = 1.0 - (2.0 * PI * k as f64 / m as f64).cos();
        sum += 2.0 * (-z * c).exp();
    }
    sum / m as f64
}

fn hankel_i0(z: Complex64) -> Complex64 {
    let inv = 1.0 / z;
    let mut dominant = Complex64::new(1.0, 0.0);
    let mut recessive = Complex64::new(1.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    for k in 1..400 {
        let odd = (2 * k - 1) as f64;
        let next = term * (odd * odd / (8.0 * k as f64)) * inv;
        if next.norm() >= term.norm() {
            break;
        }
        term = next;
        dominant += term;
        if k % 2 == 1 {
            recessive -= term;
        } else {
            recessive += term;
        }
        if term.norm() < 1e-17 * dominant.norm() {
            break;
        }
    }
    let sign = if z.im >= 0.0 { 1.0 } else { -1.0 };
    let stokes = Complex64::new(0.0, sign) * (-2.0 * z).exp() * recessive;
    (dominant + stokes) / (2.0 * PI * z).sqrt()
}

#[cfg(test)]
pub(crate) mod oracle {
    /// `e^{-z} I_n(z)` from the defining power series, for test use only.
    pub fn series_scaled_i(n: usize, z: f64, terms: usize) -> f64 {
        let half = z / 2.0;
        let mut term = (-z).exp();
        for j in 1..=n {
            term *= half / j as f64;
        }
        let mut sum = term;
        for k in 1..terms {
            term *= half * half / (k as f64 * (k + n) as f64);
            sum += term;
        }
        sum
    }
}
