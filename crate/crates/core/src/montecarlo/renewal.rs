//! Renewal sampler for the Gibbs measure.
//!
//! Split a path at its visits to the origin. A cycle is a holding time at
//! `0` followed by an excursion that returns. Under the weight
//! `e^{beta L_t}` a hold is `Exp(c)` with `c = 2d - beta` and carries the
//! factor `2d / c`, so a cycle has density
//! `k = (2d e^{-c h}) * f` of mass `m = 2d F_inf / c`, where `f` is the
//! first-return density from a neighbour and `F_inf = 1 - e_d`. At
//! `beta = beta_d` this mass is one. Paths are drawn as a renewal process
//! with cycle law `k / m` and weighted by `m^N W(A) / Kbar(A)`, where `A` is
//! the age at `t`, `Kbar` the cycle survival function and
//! `W(r) = e^{-c r} + 2d int_0^r e^{-c h} Q(r - h) dh` the weight of an
//! unfinished last segment, `Q = 1 - F`. The mean weight is `Z_{beta,t}(0)`.
//!
//! Only the return times of completed cycles are drawn from `F`; the final
//! segment is simulated as a walk and kept only if it avoids the origin,
//! which produces the factor `Q` without evaluating it.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use super::ensemble::{PathSample, Sampler, WeightedEnsemble};
use super::walk::{stream_rng, Walker};
use crate::error::{Error, Result};
use crate::lattice::{first_passage_density, LatticePoint, TimeGrid};

/// Default time step of the first-return tables.
pub const RENEWAL_STEP: f64 = 0.02;

#[derive(Debug, Clone)]
struct Tables {
    d: usize,
    t: f64,
    h: f64,
    c: f64,
    mass: f64,
    f_inf: f64,
    /// `F` at the grid nodes.
    cdf: Vec<f64>,
    /// `W / Kbar` at the grid nodes.
    ratio: Vec<f64>,
}

/// `G(r_j) = int_0^{r_j} e^{-c (r_j - s)} g(s) ds` for `g` linear between nodes.
fn exp_convolution(g: &[f64], h: f64, c: f64) -> Vec<f64> {
    let e = (-c * h).exp();
    let i0 = -(-c * h).exp_m1() / c;
    let i1 = i0 - (1.0 - e * (1.0 + c * h)) / (c * c * h);
    let mut out = Vec::with_capacity(g.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in g.windows(2) {
        acc = e * acc + w[0] * i0 + (w[1] - w[0]) * i1;
        out.push(acc);
    }
    out
}

impl Tables {
    fn new(t: f64, beta: f64, d: usize, h: f64) -> Result<Self> {
        let rate = 2.0 * d as f64;
        let c = rate - beta;
        if !(c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "renewal sampler needs beta < 2d, got {beta}"
            )));
        }
        let grid = TimeGrid::new(t, h)?;
        let e1 = LatticePoint::unit(d, 0);
        let coarse = first_passage_density(&e1, &grid)?;
        let fine = first_passage_density(&e1, &grid.refined())?;
        // The discretised first-return law is second order in the step, and
        // the cycle mass enters the weights as m^N, so both are Richardson
        // extrapolated.
        let fine_cdf = fine.cumulative();
        let mut cdf: Vec<f64> = coarse
            .cumulative()
            .iter()
            .enumerate()
            .map(|(j, &c)| (4.0 * fine_cdf[2 * j] - c) / 3.0)
            .collect();
        for j in 1..cdf.len() {
            cdf[j] = cdf[j].max(cdf[j - 1]);
        }
        let f_inf = (4.0 * fine.total_mass() - coarse.total_mass()) / 3.0;
        let mass = rate * f_inf / c;
        let q: Vec<f64> = cdf.iter().map(|f| 1.0 - f).collect();
        let rest: Vec<f64> = cdf.iter().map(|f| f_inf - f).collect();
        let gq = exp_convolution(&q, h, c);
        let gr = exp_convolution(&rest, h, c);
        let ratio = grid
            .values()
            .iter()
            .zip(gq.iter().zip(&gr))
            .map(|(&r, (&a, &b))| {
                let hold = (-c * r).exp();
                let w = hold + rate * a;
                let kbar = (rate * b + rate / c * hold * f_inf) / mass;
                w / kbar
            })
            .collect();
        Ok(Self {
            d,
            t,
            h,
            c,
            mass,
            f_inf,
            cdf,
            ratio,
        })
    }

    fn ratio_at(&self, r: f64) -> f64 {
        let x = (r / self.h).clamp(0.0, (self.ratio.len() - 1) as f64);
        let j = (x as usize).min(self.ratio.len() - 2);
        let frac = x - j as f64;
        self.ratio[j] + frac * (self.ratio[j + 1] - self.ratio[j])
    }

    /// A return time drawn from `f / F_inf`, or `None` beyond the horizon.
    fn return_time<R: Rng>(&self, rng: &mut R) -> Option<f64> {
        let target = rng.random::<f64>() * self.f_inf;
        let last = *self.cdf.last().unwrap();
        if target >= last {
            return None;
        }
        let j = self.cdf.partition_point(|&f| f <= target) - 1;
        let (a, b) = (self.cdf[j], self.cdf[j + 1]);
        let frac = if b > a { (target - a) / (b - a) } else { 0.5 };
        Some((j as f64 + frac) * self.h)
    }

    /// One weighted path, with its local time up to `probe` alongside.
    fn sample<R: Rng>(&self, rng: &mut R, probe: f64) -> (PathSample, f64) {
        let (t, c, d) = (self.t, self.c, self.d);
        let before = |u: f64, hold: f64| (probe - u).clamp(0.0, hold);
        let mut u = 0.0;
        let mut local = 0.0;
        let mut early = 0.0;
        let mut cycles = 0i32;
        loop {
            let hold = rng.sample::<f64, _>(Exp1) / c;
            match self.return_time(rng) {
                Some(tau) if u + hold + tau <= t => {
                    early += before(u, hold);
                    u += hold + tau;
                    local += hold;
                    cycles += 1;
                }
                _ => break,
            }
        }
        let r = t - u;
        let weight = self.mass.powi(cycles) * self.ratio_at(r);
        let stay = (-c * r).exp();
        let p_stay = stay / (stay + 2.0 * d as f64 / c * (1.0 - stay));
        loop {
            if rng.random::<f64>() < p_stay {
                let path = PathSample {
                    endpoint: LatticePoint::origin(d),
                    last_visit: t,
                    local_time: local + r,
                    weight,
                };
                return (path, early + before(u, r));
            }
            // Hold from Exp(c) truncated to [0, r], then an excursion that
            // must avoid the origin for the rest of the horizon.
            let hold = -(rng.random::<f64>() * (-c * r).exp_m1()).ln_1p() / c;
            let hold = hold.min(r);
            let dir = rng.random_range(0..2 * d);
            let mut pos = vec![0; d];
            pos[dir / 2] = if dir % 2 == 0 { 1 } else { -1 };
            let mut w = Walker::at(pos);
            w.advance(rng, r - hold);
            if w.local_time == 0.0 && w.l1 > 0 {
                let path = PathSample {
                    endpoint: LatticePoint::from(w.pos),
                    last_visit: u + hold,
                    local_time: local + hold,
                    weight,
                };
                return (path, early + before(u, hold));
            }
        }
    }
}

/// `n` weighted paths of `P_{beta,t}` from the renewal sampler, with
/// first-return tables on a grid of step `step`. Sample `i` uses stream `i`
/// of `seed`.
pub fn sample_gibbs_paths(t: f64, n: usize, beta: f64, d: usize, seed: u64, step: f64) -> Result<WeightedEnsemble> {
    super::ensemble::validate(t, n, beta, d)?;
    if d < 3 {
        return Err(Error::InvalidArgument(format!(
            "renewal sampler needs a transient walk (d >= 3), got d = {d}"
        )));
    }
    if !(step > 0.0) || step > t {
        return Err(Error::InvalidArgument(format!("table step must lie in (0, t], got {step}")));
    }
    let tables = Tables::new(t, beta, d, step)?;
    let samples: Vec<PathSample> = (0..n as u64)
        .into_par_iter()
        .map(|i| tables.sample(&mut stream_rng(seed, i), t).0)
        .collect();
    Ok(WeightedEnsemble::new(samples, t, beta, seed, d, Sampler::Renewal))
}
