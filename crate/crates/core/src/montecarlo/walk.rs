//! Exact simulation of the rate-`2d` walk with block moves away from the
//! origin: from `|x|_1 = D >= 2` the next `D - 1` jumps cannot reach `0`,
//! so they are drawn at once.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, Exp1, Gamma, Poisson};

/// Below this many jumps a block is drawn jump by jump.
const SMALL_BLOCK: u64 = 12;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Exact `Binomial(m, 1/2)`: a popcount of `m` random bits for moderate `m`.
fn binomial_half<R: Rng>(rng: &mut R, m: u64) -> u64 {
    if m > 1024 {
        return Binomial::new(m, 0.5).unwrap().sample(rng);
    }
    let mut left = m;
    let mut acc = 0;
    while left >= 64 {
        acc += rng.next_u64().count_ones() as u64;
        left -= 64;
    }
    if left > 0 {
        acc += (rng.next_u64() & ((1u64 << left) - 1)).count_ones() as u64;
    }
    acc
}

/// Distributes `m` uniform jumps over the axes of `pos` by halving the
/// axis set, so that most splits are fair coins.
fn spread<R: Rng>(rng: &mut R, pos: &mut [i64], m: u64) {
    if pos.len() == 1 {
        let up = binomial_half(rng, m);
        pos[0] += 2 * up as i64 - m as i64;
        return;
    }
    let half = pos.len() / 2;
    let left = if 2 * half == pos.len() {
        binomial_half(rng, m)
    } else {
        Binomial::new(m, half as f64 / pos.len() as f64).unwrap().sample(rng)
    };
    let (a, b) = pos.split_at_mut(half);
    spread(rng, a, left);
    spread(rng, b, m - left);
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Walker {
    pub pos: Vec<i64>,
    pub l1: i64,
    pub time: f64,
    pub local_time: f64,
    pub last_visit: f64,
}

impl Walker {
    pub fn at_origin(d: usize) -> Self {
        Self {
            pos: vec![0; d],
            l1: 0,
            time: 0.0,
            local_time: 0.0,
            last_visit: 0.0,
        }
    }

    pub fn at(pos: Vec<i64>) -> Self {
        let l1 = pos.iter().map(|c| c.abs()).sum();
        Self {
            pos,
            l1,
            time: 0.0,
            local_time: 0.0,
            last_visit: 0.0,
        }
    }

    fn rate(&self) -> f64 {
        2.0 * self.pos.len() as f64
    }

    fn refresh_l1(&mut self) {
        self.l1 = self.pos.iter().map(|c| c.abs()).sum();
    }

    fn single_jump<R: Rng>(&mut self, rng: &mut R) {
        let d = self.pos.len();
        let dir = rng.random_range(0..2 * d);
        self.pos[dir / 2] += if dir % 2 == 0 { 1 } else { -1 };
        self.refresh_l1();
    }

    /// Applies `k` uniform nearest-neighbour jumps.
    fn jumps<R: Rng>(&mut self, rng: &mut R, k: u64) {
        let d = self.pos.len();
        if k <= SMALL_BLOCK {
            for _ in 0..k {
                let dir = rng.random_range(0..2 * d);
                self.pos[dir / 2] += if dir % 2 == 0 { 1 } else { -1 };
            }
        } else {
            spread(rng, &mut self.pos, k);
        }
        self.refresh_l1();
    }

    /// Runs the walk up to time `until`, accumulating local time and the
    /// last visit to the origin.
    pub fn advance<R: Rng>(&mut self, rng: &mut R, until: f64) {
        let rate = self.rate();
        while self.time < until {
            let left = until - self.time;
            if self.l1 <= 1 {
                let hold: f64 = rng.sample::<f64, _>(Exp1) / rate;
                let at_origin = self.l1 == 0;
                if hold >= left {
                    if at_origin {
                        self.local_time += left;
                        self.last_visit = until;
                    }
                    self.time = until;
                    return;
                }
                self.time += hold;
                if at_origin {
                    self.local_time += hold;
                    self.last_visit = self.time;
                }
                self.single_jump(rng);
                if self.l1 == 0 {
                    self.last_visit = self.time;
                }
            } else {
                // Jump count in the remaining window; if it reaches k, the
                // k-th jump time is the k-th order statistic of J uniforms.
                let k = (self.l1 - 1) as u64;
                let j = Poisson::new(rate * left).unwrap().sample(rng) as u64;
                if j < k {
                    self.jumps(rng, j);
                    self.time = until;
                    return;
                }
                let frac: f64 = Beta::new(k as f64, (j - k + 1) as f64).unwrap().sample(rng);
                self.time = (self.time + left * frac).min(until);
                self.jumps(rng, k);
            }
        }
    }

    /// Whether the walk, started off the origin, reaches it before `t_cut`.
    pub fn hits_origin_before<R: Rng>(&mut self, rng: &mut R, t_cut: f64) -> bool {
        let rate = self.rate();
        loop {
            if self.l1 <= 1 {
                self.time += rng.sample::<f64, _>(Exp1) / rate;
                if self.time >= t_cut {
                    return false;
                }
                self.single_jump(rng);
                if self.l1 == 0 {
                    return true;
                }
            } else {
                let k = (self.l1 - 1) as u64;
                self.time += Gamma::new(k as f64, 1.0 / rate).unwrap().sample(rng);
                if self.time >= t_cut {
                    return false;
                }
                self.jumps(rng, k);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream_rng(5, 1).random();
        let b: u64 = stream_rng(5, 1).random();
        let c: u64 = stream_rng(5, 2).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn block_jumps_have_the_walk_law() {
        // After 20 jumps each coordinate of the d=2 walk has variance 10.
        let mut rng = stream_rng(1, 0);
        let n = 40_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let mut w = Walker::at(vec![0, 0]);
            w.jumps(&mut rng, 20);
            let x = w.pos[0] as f64;
            s1 += x;
            s2 += x * x;
            assert_eq!((w.pos[0] + w.pos[1]).rem_euclid(2), 0);
        }
        assert!((s1 / n as f64).abs() < 0.05);
        assert!((s2 / n as f64 - 10.0).abs() < 0.3);
    }

    #[test]
    fn fair_binomial_moments() {
        let mut rng = stream_rng(4, 0);
        for m in [1u64, 63, 64, 130, 2000] {
            let n = 20_000;
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let b = binomial_half(&mut rng, m) as f64;
                assert!(b <= m as f64);
                s1 += b;
                s2 += b * b;
            }
            let mean = s1 / n as f64;
            let var = s2 / n as f64 - mean * mean;
            let sd = (m as f64 / 4.0).sqrt();
            assert!((mean - m as f64 / 2.0).abs() < 4.0 * sd / (n as f64).sqrt());
            assert!((var / (m as f64 / 4.0) - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn spread_is_isotropic_in_odd_dimensions() {
        let mut rng = stream_rng(6, 0);
        let n = 20_000;
        let mut sq = [0.0; 3];
        for _ in 0..n {
            let mut p = [0i64; 3];
            spread(&mut rng, &mut p, 30);
            for (a, &c) in sq.iter_mut().zip(&p) {
                *a += (c * c) as f64;
            }
        }
        // 30 jumps, one third per axis on average.
        for a in sq {
            assert!((a / n as f64 - 10.0).abs() < 0.35, "{a}");
        }
    }

    #[test]
    fn advance_matches_free_variance_and_origin_mass() {
        // d=1, t=3: E x_t^2 = 2t and P(x_t = 0) = e^{-2t} I_0(2t).
        let mut rng = stream_rng(2, 0);
        let n = 40_000;
        let (mut s2, mut zero) = (0.0, 0usize);
        for _ in 0..n {
            let mut w = Walker::at_origin(1);
            w.advance(&mut rng, 3.0);
            assert!(w.local_time <= 3.0 && w.last_visit <= 3.0 && w.local_time > 0.0);
            s2 += (w.pos[0] * w.pos[0]) as f64;
            zero += (w.pos[0] == 0) as usize;
        }
        assert!((s2 / n as f64 - 6.0).abs() < 0.15);
        let p0 = crate::lattice::free_kernel_diag(3.0, 1).unwrap();
        assert!((zero as f64 / n as f64 - p0).abs() < 0.01);
    }

    #[test]
    fn split_advance_has_the_same_law() {
        // Stopping at intermediate times must not bias the walk.
        let n = 20_000;
        let mut far = 0.0;
        for i in 0..n {
            let mut rng = stream_rng(3, i);
            let mut w = Walker::at(vec![5, 0, 0]);
            for k in 1..=10 {
                w.advance(&mut rng, k as f64);
            }
            far += (w.pos[0] * w.pos[0]) as f64;
        }
        // E x_1^2 = 25 + 2t with t = 10.
        assert!((far / n as f64 - 45.0).abs() < 1.0);
    }
}
