use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::walk::stream_rng;
use crate::error::{Error, Result};
use crate::field::{EigenPair, MomentGrowth, ResolventTable};
use crate::lattice::LatticePoint;

/// Tolerance on `sum_y psi(y) / psi(x) = 2d - beta delta_0(x) + lambda_0`.
pub const EXIT_RATE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub position: LatticePoint,
    pub clock: f64,
    /// Holding time accumulated at each visited site.
    pub occupation: BTreeMap<LatticePoint, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainOptions {
    /// The run stops with an error once `|x|_inf` exceeds this.
    pub max_radius: i64,
    /// Equal-time batches for the batch-means error bar.
    pub batches: usize,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            max_radius: 400,
            batches: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub state: ChainState,
    pub jumps: u64,
    pub origin_fraction: f64,
    /// Batch-means standard error of `origin_fraction`.
    pub origin_stderr: f64,
    pub batch_fractions: Vec<f64>,
    /// Largest `|x|_inf` reached.
    pub max_excursion: i64,
    /// Largest `|exit rate - (2d - beta delta_0 + lambda_0)|` seen.
    pub max_exit_rate_error: f64,
}

impl ChainRun {
    /// Partial sums `sum_{|x|_inf <= r} |x|_2^k occupation(x) / clock`.
    pub fn radial_moment_growth(&self, k: u32, radii: &[i64]) -> Result<MomentGrowth> {
        MomentGrowth::check_radii(radii)?;
        let mut partial_sums = vec![0.0; radii.len()];
        for (x, &occ) in &self.state.occupation {
            let term = x.euclid_norm().powi(k as i32) * occ / self.state.clock;
            for (s, &r) in partial_sums.iter_mut().zip(radii) {
                if x.sup_norm() <= r {
                    *s += term;
                }
            }
        }
        Ok(MomentGrowth::new(k, radii, partial_sums))
    }
}

struct Psi<'a> {
    pair: &'a EigenPair,
    table: ResolventTable,
    cache: HashMap<Vec<u32>, f64>,
}

impl Psi<'_> {
    fn at(&mut self, x: &LatticePoint) -> f64 {
        if let Some(v) = self.pair.field.get(x) {
            return v;
        }
        let rep = x.canonical();
        if let Some(&v) = self.cache.get(&rep) {
            return v;
        }
        let v = self.table.value_rep(&rep).expect("site inside the radius cap");
        self.cache.insert(rep, v);
        v
    }
}

/// The Doob transform of `Delta + beta delta_0` by `psi`: jumps to each
/// neighbour `y` at rate `psi(y) / psi(x)`, started at the origin. The exit
/// rate identity is checked at every visited site.
pub fn simulate_h_chain(pair: &EigenPair, t_total: f64, seed: u64) -> Result<ChainRun> {
    simulate_h_chain_with(pair, t_total, seed, &ChainOptions::default())
}

pub fn simulate_h_chain_with(
    pair: &EigenPair,
    t_total: f64,
    seed: u64,
    opts: &ChainOptions,
) -> Result<ChainRun> {
    let d = pair.dim();
    if !(t_total > 0.0) || !t_total.is_finite() {
        return Err(Error::InvalidArgument(format!("t_total must be positive, got {t_total}")));
    }
    if opts.batches < 2 || opts.max_radius < 1 || opts.max_radius > 5000 {
        return Err(Error::InvalidArgument(
            "need at least two batches and a radius cap in 1..=5000".into(),
        ));
    }
    if pair.lambda0 == 0.0 && d <= 4 {
        return Err(Error::NotSquareSummable { d, beta: pair.beta });
    }
    let cap = opts.max_radius.max(pair.field.box_radius) + 1;
    let mut psi = Psi {
        pair,
        table: pair.table(cap as u32),
        cache: HashMap::new(),
    };
    let mut rng = stream_rng(seed, 0);
    let batch_len = t_total / opts.batches as f64;
    let mut batch_origin = vec![0.0; opts.batches];
    let mut occupation: BTreeMap<LatticePoint, f64> = BTreeMap::new();
    let mut pos = LatticePoint::origin(d);
    let mut clock = 0.0;
    let mut jumps = 0u64;
    let mut max_excursion = 0;
    let mut max_err = 0.0_f64;
    let mut rates = vec![0.0; 2 * d];
    let mut nbrs: Vec<LatticePoint> = Vec::with_capacity(2 * d);
    loop {
        let here = psi.at(&pos);
        nbrs.clear();
        nbrs.extend(pos.neighbors());
        let mut total = 0.0;
        for (r, y) in rates.iter_mut().zip(&nbrs) {
            *r = psi.at(y) / here;
            total += *r;
        }
        let expected = 2.0 * d as f64 - if pos.is_origin() { pair.beta } else { 0.0 } + pair.lambda0;
        let err = (total - expected).abs();
        max_err = max_err.max(err);
        if !(err <= EXIT_RATE_TOL) {
            return Err(Error::Convergence(format!(
                "exit rate {total} at {:?} differs from {expected} by {err:e}",
                pos.coords()
            )));
        }
        let hold: f64 = rng.sample::<f64, _>(Exp1) / total;
        let end = (clock + hold).min(t_total);
        *occupation.entry(pos.clone()).or_insert(0.0) += end - clock;
        if pos.is_origin() {
            let mut a = clock;
            while a < end {
                let b = ((a / batch_len).floor() as usize).min(opts.batches - 1);
                let stop = ((b + 1) as f64 * batch_len).min(end);
                batch_origin[b] += stop - a;
                a = if stop > a { stop } else { end };
            }
        }
        clock = end;
        if clock >= t_total {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = nbrs.len() - 1;
        for (i, &r) in rates.iter().enumerate() {
            if u < r {
                pick = i;
                break;
            }
            u -= r;
        }
        pos = nbrs[pick].clone();
        jumps += 1;
        let sup = pos.sup_norm();
        max_excursion = max_excursion.max(sup);
        if sup > opts.max_radius {
            return Err(Error::ChainEscaped {
                radius: opts.max_radius,
                time: clock,
                max_radius: sup,
            });
        }
    }
    let batch_fractions: Vec<f64> = batch_origin.iter().map(|b| b / batch_len).collect();
    let m = batch_fractions.len() as f64;
    let mean = batch_fractions.iter().sum::<f64>() / m;
    let var = batch_fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let origin_time = occupation.get(&LatticePoint::origin(d)).copied().unwrap_or(0.0);
    Ok(ChainRun {
        state: ChainState {
            position: pos,
            clock,
            occupation,
        },
        jumps,
        origin_fraction: origin_time / clock,
        origin_stderr: (var / m).sqrt(),
        batch_fractions,
        max_excursion,
        max_exit_rate_error: max_err,
    })
}
