//! Empirical total-variation curves: the coupling survival `P(T > t)`
//! bounds the distance from above, a binned two-sample estimate from below.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::coupling::{coupling_batch, CouplingSpec};
use crate::error::{invalid, Error, Result};
use crate::model::{ModelParams, Process};
use crate::path::{State, Velocity};
use crate::rng::{domain, try_par_map, RngStream};
use crate::simulate::{next_reflected, next_unreflected};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvCurve {
    pub t_grid: Vec<f64>,
    pub empirical_coupling_survival: Vec<f64>,
    pub survival_std_error: Vec<f64>,
    pub empirical_binned_tv: Vec<f64>,
    pub binned_tv_std_error: Vec<f64>,
    pub theoretical_bound: Vec<f64>,
}

impl TvCurve {
    /// Writes `t,coupling_survival,binned_tv,theoretical_bound` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,coupling_survival,binned_tv,theoretical_bound")?;
        for i in 0..self.t_grid.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.t_grid[i],
                self.empirical_coupling_survival[i],
                self.empirical_binned_tv[i],
                self.theoretical_bound[i]
            )?;
        }
        Ok(())
    }
}

/// Binned TV estimate with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinnedTv {
    pub tv: f64,
    pub std_error: f64,
}

/// `½ Σ |p̂₁ − p̂₂|` over cells `(velocity, ⌊position/h⌋)`.
pub fn binned_tv(s1: &[State], s2: &[State], h: f64) -> Result<BinnedTv> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("bin width must be > 0, got {h}")));
    }
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut cells: BTreeMap<(i8, i64), (u64, u64)> = BTreeMap::new();
    for s in s1 {
        cells
            .entry((s.velocity.as_i8(), (s.position / h).floor() as i64))
            .or_default()
            .0 += 1;
    }
    for s in s2 {
        cells
            .entry((s.velocity.as_i8(), (s.position / h).floor() as i64))
            .or_default()
            .1 += 1;
    }
    let (n1, n2) = (s1.len() as f64, s2.len() as f64);
    let (mut tv, mut m1, mut q1, mut m2, mut q2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(c1, c2) in cells.values() {
        let (p1, p2) = (c1 as f64 / n1, c2 as f64 / n2);
        let d = p1 - p2;
        tv += d.abs();
        if d != 0.0 {
            let s = d.signum();
            m1 += s * p1;
            q1 += p1;
            m2 += s * p2;
            q2 += p2;
        }
    }
    let var = 0.25 * ((q1 - m1 * m1) / n1 + (q2 - m2 * m2) / n2);
    Ok(BinnedTv {
        tv: 0.5 * tv,
        std_error: var.max(0.0).sqrt(),
    })
}

/// States of one freshly simulated path at every time of `grid`.
fn states_on_grid(
    process: Process,
    start: State,
    grid: &[f64],
    p: &ModelParams,
    rng: &mut RngStream,
) -> Vec<State> {
    let mut out = Vec::with_capacity(grid.len());
    let (mut t, mut s) = (0.0, start);
    let step = |s: State, t: f64, rng: &mut RngStream| match process {
        Process::Reflected => next_reflected(s, t, p, rng),
        Process::Unreflected => next_unreflected(s, t, p, rng),
    };
    let mut next = step(s, t, rng);
    for &g in grid {
        while next.time <= g {
            t = next.time;
            s = State::new(next.position, next.velocity);
            next = step(s, t, rng);
        }
        let mut x = s.position + s.velocity.sign() * (g - t);
        if process == Process::Reflected {
            x = x.max(0.0);
        }
        out.push(State::new(x, s.velocity));
    }
    out
}

/// Coupling survival, binned TV and the theoretical bound on `t_grid`.
///
/// Runs `n` couplings and `n` independent paths from each start; the
/// couplings use stream domain `COUPLING`, the two samples `TV_LEFT` and
/// `TV_RIGHT`.
#[allow(clippy::too_many_arguments)]
pub fn tv_curve(
    init_1: State,
    init_2: State,
    process: Process,
    t_grid: &[f64],
    n: usize,
    h: f64,
    p: &ModelParams,
    seed: u64,
) -> Result<TvCurve> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("bin width must be > 0, got {h}")));
    }
    if n < 1000 {
        return Err(invalid(format!("tv curve needs n >= 1000, got {n}")));
    }
    if t_grid.is_empty()
        || t_grid[0] < 0.0
        || t_grid.windows(2).any(|w| !(w[1] > w[0]))
        || !t_grid[t_grid.len() - 1].is_finite()
    {
        return Err(invalid(
            "time grid must be nonempty, finite, nonnegative and increasing",
        ));
    }
    p.require_ergodic()?;
    let t_max = t_grid[t_grid.len() - 1];
    let spec = CouplingSpec {
        process,
        start_1: init_1,
        start_2: init_2,
        horizon: t_max.max(f64::MIN_POSITIVE),
    };
    let runs = coupling_batch(&spec, n, p, seed)?;

    let sample = |start: State, dom: u64| -> Result<Vec<Vec<State>>> {
        try_par_map(seed, dom, n, |rng, _| {
            Ok(states_on_grid(process, start, t_grid, p, rng))
        })
    };
    let left = sample(init_1, domain::TV_LEFT)?;
    let right = sample(init_2, domain::TV_RIGHT)?;

    let nf = n as f64;
    let mut curve = TvCurve {
        t_grid: t_grid.to_vec(),
        empirical_coupling_survival: Vec::new(),
        survival_std_error: Vec::new(),
        empirical_binned_tv: Vec::new(),
        binned_tv_std_error: Vec::new(),
        theoretical_bound: Vec::new(),
    };
    for (k, &t) in t_grid.iter().enumerate() {
        let surv = runs.iter().filter(|r| r.survives(t)).count() as f64 / nf;
        curve.empirical_coupling_survival.push(surv);
        curve
            .survival_std_error
            .push((surv * (1.0 - surv) / nf).sqrt());
        let col1: Vec<State> = left.iter().map(|v| v[k]).collect();
        let col2: Vec<State> = right.iter().map(|v| v[k]).collect();
        let b = binned_tv(&col1, &col2, h)?;
        curve.empirical_binned_tv.push(b.tv);
        curve.binned_tv_std_error.push(b.std_error);
        curve.theoretical_bound.push(p.tv_bound(
            t,
            init_1.position.abs(),
            init_2.position.abs(),
            process,
        )?);
    }
    Ok(curve)
}

/// Default bin width `0.05/(b−a)`.
pub fn default_bin_width(p: &ModelParams) -> Result<f64> {
    p.require_ergodic()?;
    Ok(0.05 / (p.b() - p.a()))
}

/// Least-squares slope of `ln P(T > t)` against `t` over the grid points
/// with survival in `(10⁻³, 0.5)`.
pub fn empirical_decay_rate(curve: &TvCurve) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve
        .t_grid
        .iter()
        .zip(&curve.empirical_coupling_survival)
        .filter(|(_, &s)| s > 1e-3 && s < 0.5)
        .map(|(&t, &s)| (t, s.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientDecay { usable: pts.len() });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Ok(sxy / sxx)
}

/// All-`+1` states at the given positions, for binning velocity-free samples.
pub fn positions_as_states(xs: &[f64]) -> Vec<State> {
    xs.iter().map(|&x| State::new(x, Velocity::Pos)).collect()
}
