use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::walk::{stream_rng, Walker};
use crate::error::{Error, Result};
use crate::lattice::{free_kernel, LatticePoint};
use crate::quadrature::PanelRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeEstimate {
    pub dim: usize,
    pub t_cut: f64,
    pub samples: usize,
    /// Fraction of walks from a neighbour of `0` that avoid `0` up to `t_cut`.
    pub raw: f64,
    /// `raw` minus the estimated probability of a first return after `t_cut`.
    pub value: f64,
    pub stderr: f64,
    /// Expected number of arrivals at `0` after `t_cut`, which bounds
    /// `raw - e_d` from above.
    pub bias_bound: f64,
    pub note: Option<String>,
}

/// Expected number of jumps into the origin after time `t` for the walk
/// started at `e_1`: `2d int_t^inf p_0(s, e_1) ds - p_0(t, e_1)`.
pub fn late_arrivals(d: usize, t: f64) -> Result<f64> {
    if d < 3 {
        return Ok(f64::INFINITY);
    }
    let e1 = LatticePoint::unit(d, 0);
    let end = 1e12;
    let rule = PanelRule::geometric(0.05 * (t + 1.0), 1.25, end);
    let mut integral = 0.0;
    for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
        integral += w * free_kernel(t + u, &e1)?;
    }
    let h = d as f64 / 2.0;
    integral += (4.0 * PI).powf(-h) * end.powf(1.0 - h) / (h - 1.0);
    Ok(2.0 * d as f64 * integral - free_kernel(t, &e1)?)
}

/// Escape probability `e_d` by direct simulation up to `t_cut`.
///
/// Walks that escape past `t_cut` but return later are counted as escapes.
/// Asymptotically a fraction `e_d^2` of the late arrival count consists of
/// such first returns, and that amount is subtracted from `value`.
pub fn estimate_escape_probability(d: usize, t_cut: f64, n: usize, seed: u64) -> Result<EscapeEstimate> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    if !(t_cut > 0.0) || !t_cut.is_finite() || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "need t_cut > 0 and n >= 1, got t_cut = {t_cut}, n = {n}"
        )));
    }
    if d <= 2 {
        return Ok(EscapeEstimate {
            dim: d,
            t_cut,
            samples: 0,
            raw: 0.0,
            value: 0.0,
            stderr: 0.0,
            bias_bound: 0.0,
            note: Some(format!("recurrent in d = {d}: the walk returns with probability 1")),
        });
    }
    let escaped: u64 = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let dir = rng.random_range(0..2 * d);
            let mut pos = vec![0; d];
            pos[dir / 2] = if dir % 2 == 0 { 1 } else { -1 };
            let mut w = Walker::at(pos);
            !w.hits_origin_before(&mut rng, t_cut) as u64
        })
        .sum();
    let raw = escaped as f64 / n as f64;
    let bias_bound = late_arrivals(d, t_cut)?;
    let value = raw - raw * raw * bias_bound;
    Ok(EscapeEstimate {
        dim: d,
        t_cut,
        samples: n,
        raw,
        value,
        stderr: (raw * (1.0 - raw) / n as f64).sqrt(),
        bias_bound,
        note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrent_dimensions_return_zero() {
        let e = estimate_escape_probability(1, 100.0, 10, 0).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.note.unwrap().contains("recurrent"));
        assert!(estimate_escape_probability(0, 1.0, 1, 0).is_err());
    }

    #[test]
    fn late_arrivals_match_the_local_clt() {
        // 2d (4 pi)^{-d/2} t^{1-d/2} / (d/2 - 1) to leading order.
        let t: f64 = 1e6;
        let lead = 6.0 * (4.0 * PI).powf(-1.5) * t.powf(-0.5) / 0.5;
        let a = late_arrivals(3, t).unwrap();
        assert!((a / lead - 1.0).abs() < 1e-3, "{a} {lead}");
    }

    #[test]
    fn bias_correction_removes_the_horizon_dependence() {
        // Short and long horizons agree once late first returns are removed.
        let short = estimate_escape_probability(3, 50.0, 200_000, 4).unwrap();
        let long = estimate_escape_probability(3, 2000.0, 200_000, 4).unwrap();
        assert!(short.raw - long.raw > 0.01);
        let gap = (short.value - long.value).abs();
        assert!(gap < 3.0 * short.stderr, "{short:?} {long:?}");
    }
}
