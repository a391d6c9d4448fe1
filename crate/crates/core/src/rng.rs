//! Deterministic random streams and the parallel Monte Carlo driver.
//!
//! Every stream is a ChaCha8 generator keyed by a root seed and selected by a
//! 64-bit stream id, so distinct ids never share draws. Task-level stream ids
//! are a pure function of `(domain, index)`; results therefore do not depend
//! on how rayon schedules the work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::path::Velocity;

/// Bits reserved for the task index inside a stream id.
const INDEX_BITS: u32 = 40;

#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        RngStream { inner }
    }

    /// Stream for task `index` of a computation tagged `domain`.
    pub fn for_task(seed: u64, domain: u64, index: u64) -> Self {
        Self::new(seed, task_stream_id(domain, index))
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Exponential with the given rate, by inversion.
    pub fn exp(&mut self, rate: f64) -> f64 {
        debug_assert!(rate > 0.0);
        // 1 − U lies in (0, 1], so the log is finite.
        -(1.0 - self.uniform()).ln() / rate
    }

    pub fn poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        match Poisson::new(mean) {
            Ok(d) => d.sample(&mut self.inner) as u64,
            Err(_) => u64::MAX,
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Fair coin on `{−1, +1}`.
    pub fn velocity(&mut self) -> Velocity {
        if self.bernoulli(0.5) {
            Velocity::Pos
        } else {
            Velocity::Neg
        }
    }
}

pub fn task_stream_id(domain: u64, index: u64) -> u64 {
    debug_assert!(index < (1 << INDEX_BITS));
    (domain << INDEX_BITS) | index
}

/// Stream-id domains used by the built-in Monte Carlo routines.
pub mod domain {
    pub const SIMULATE: u64 = 1;
    pub const EXCURSION: u64 = 2;
    pub const HITTING: u64 = 3;
    pub const REGENERATIVE: u64 = 4;
    pub const COUPLING: u64 = 5;
    pub const TV_LEFT: u64 = 6;
    pub const TV_RIGHT: u64 = 7;
    pub const SDE: u64 = 8;
    pub const SCALING: u64 = 9;
    pub const TBAR: u64 = 10;
    pub const STICK: u64 = 11;
    pub const SIGMA: u64 = 12;
    /// Free range for callers (tests, CLI extras).
    pub const USER: u64 = 1 << 20;
}

/// Runs `n` independent tasks in parallel, task `i` on stream
/// `(seed, domain, i)`. Output order is the task order.
pub fn par_map<T, F>(seed: u64, domain: u64, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut RngStream, usize) -> T + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::for_task(seed, domain, i as u64);
            f(&mut rng, i)
        })
        .collect()
}

/// Fallible [`par_map`]; the first error in task order is returned.
pub fn try_par_map<T, E, F>(seed: u64, domain: u64, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(&mut RngStream, usize) -> Result<T, E> + Sync + Send,
{
    par_map(seed, domain, n, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_reproduce() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 4);
        let xs: Vec<f64> = (0..8).map(|_| a.uniform()).collect();
        let ys: Vec<f64> = (0..8).map(|_| b.uniform()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn par_map_is_schedule_independent() {
        let f = |r: &mut RngStream, i: usize| r.exp(1.0 + i as f64);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let x = one.install(|| par_map(11, domain::USER, 500, f));
        let y = four.install(|| par_map(11, domain::USER, 500, f));
        assert_eq!(x, y);
    }

    #[test]
    fn exp_mean() {
        let mut r = RngStream::new(1, 0);
        let n = 200_000;
        let m: f64 = (0..n).map(|_| r.exp(2.0)).sum::<f64>() / n as f64;
        // sd of the mean = 0.5/√n ≈ 0.0011
        assert!((m - 0.5).abs() < 0.005);
    }

    #[test]
    fn poisson_zero_mean() {
        let mut r = RngStream::new(1, 0);
        assert_eq!(r.poisson(0.0), 0);
    }
}
