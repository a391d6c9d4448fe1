//! Monte Carlo estimates and Kolmogorov–Smirnov machinery.

use serde::Serialize;

use crate::error::{Error, Result};

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl EstimateWithCI {
    /// Sample mean and standard error of the mean.
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
            (ss / ((n - 1) as f64 * n as f64)).sqrt()
        } else {
            0.0
        };
        Ok(EstimateWithCI { mean, std_error, n })
    }

    /// Proportion estimate with binomial standard error.
    pub fn proportion(successes: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let p = successes as f64 / n as f64;
        Ok(EstimateWithCI {
            mean: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        })
    }

    /// `|mean − target| <= k · std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }

    /// Distance to `target` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.std_error == 0.0 {
            if self.mean == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - target) / self.std_error
        }
    }
}

/// Statistic and asymptotic p-value of a KS test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// p-value with the small-sample correction `(√n + 0.12 + 0.11/√n)·D`.
fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let en = n_eff.sqrt();
    kolmogorov_q((en + 0.12 + 0.11 / en) * d)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(s1: &[f64], s2: &[f64]) -> Result<KsResult> {
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::EmptySample);
    }
    let (a, b) = (sorted(s1), sorted(s2));
    let d = max_cdf_gap(&a, &b).0.max(max_cdf_gap(&b, &a).0);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n1 * n2 / (n1 + n2)),
    })
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let v = sorted(xs);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    })
}

/// `sup_t (F_b(t) − F_a(t))` over the pooled sample points, for sorted
/// inputs; also returns the maximising point.
fn max_cdf_gap(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best = (0.0, f64::NAN);
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        let gap = j as f64 / nb - i as f64 / na;
        if gap > best.0 {
            best = (gap, t);
        }
    }
    best
}

/// Largest amount by which the empirical CDF of `smaller` falls below that
/// of `larger`. Zero when `smaller ≼ larger` holds exactly in the samples.
///
/// `+∞` entries are allowed and count as never reaching any finite `t`.
pub fn dominance_violation(smaller: &[f64], larger: &[f64]) -> f64 {
    max_cdf_gap(&sorted(smaller), &sorted(larger)).0
}

/// Half-width of the two-sample KS acceptance band at level `alpha`,
/// `c(α)·√((n₁+n₂)/(n₁n₂))` with `c(α) = √(−ln(α/2)/2)`.
pub fn ks_band(n1: usize, n2: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let (n1, n2) = (n1 as f64, n2 as f64);
    c * ((n1 + n2) / (n1 * n2)).sqrt()
}
