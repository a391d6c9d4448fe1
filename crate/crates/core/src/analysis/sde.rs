//! Euler–Maruyama oracle for `dξ = dB − c·sgn(ξ) dt` and the comparison
//! with accelerated telegraph endpoints.

use serde::Serialize;

use crate::analysis::stats::ks_two_sample;
use crate::error::{invalid, Result};
use crate::model::ModelParams;
use crate::path::State;
use crate::rng::{domain, par_map, try_par_map, RngStream};
use crate::simulate::unreflected_endpoint;

/// Default Euler step `10⁻³·min(1, 1/c²)`.
pub fn default_dt(c: f64) -> f64 {
    if c == 0.0 {
        1e-3
    } else {
        1e-3 * (1.0f64).min(1.0 / (c * c))
    }
}

fn check(c: f64, xi0: f64, dt: f64, horizon: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("dt must be > 0, got {dt}")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(invalid(format!(
            "horizon must be finite and >= 0, got {horizon}"
        )));
    }
    if !(c.is_finite() && xi0.is_finite()) {
        return Err(invalid("drift and start must be finite"));
    }
    Ok(())
}

/// One Euler–Maruyama endpoint. The step is shrunk so that it divides the
/// horizon; `sgn(0) = 0`.
pub fn sde_endpoint(c: f64, xi0: f64, dt: f64, horizon: f64, rng: &mut RngStream) -> f64 {
    let steps = (horizon / dt).ceil().max(1.0) as u64;
    let h = horizon / steps as f64;
    let sh = h.sqrt();
    let mut xi = xi0;
    for _ in 0..steps {
        let s = if xi > 0.0 {
            1.0
        } else if xi < 0.0 {
            -1.0
        } else {
            0.0
        };
        xi += sh * rng.normal() - c * s * h;
    }
    xi
}

/// `n` oracle endpoints on streams `(seed, SDE, i)`.
pub fn sde_oracle(
    c: f64,
    xi0: f64,
    dt: f64,
    horizon: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check(c, xi0, dt, horizon)?;
    Ok(par_map(seed, domain::SDE, n, |rng, _| {
        sde_endpoint(c, xi0, dt, horizon, rng)
    }))
}

/// Endpoints of Brownian motion with drift `−c` reflected at 0, from `x0`.
///
/// `|ξ|` for the bang-bang diffusion has exactly this law.
pub fn reflected_bm_oracle(
    c: f64,
    x0: f64,
    dt: f64,
    horizon: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if x0 < 0.0 {
        return Err(invalid(format!("reflected start must be >= 0, got {x0}")));
    }
    Ok(sde_oracle(c, x0, dt, horizon, n, seed)?
        .into_iter()
        .map(f64::abs)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingCheck {
    #[serde(rename = "N")]
    pub n_scale: f64,
    pub c: f64,
    pub t: f64,
    pub ks_stat: f64,
    pub p_value: f64,
}

impl ScalingCheck {
    pub fn write_csv<W: std::io::Write>(rows: &[ScalingCheck], mut out: W) -> Result<()> {
        writeln!(out, "N,c,t,ks_stat,p_value")?;
        for r in rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.n_scale, r.c, r.t, r.ks_stat, r.p_value
            )?;
        }
        Ok(())
    }
}

/// Endpoint of `Y` at time `t(a_N+b_N)/2` for rates `a_N = N−c`,
/// `b_N = N+c`, started at `ξ₀` with a fair-coin velocity.
pub fn rescaled_endpoint(p: &ModelParams, xi0: f64, t: f64, rng: &mut RngStream) -> Result<f64> {
    if t == 0.0 {
        return Ok(xi0);
    }
    let w = rng.velocity();
    let horizon = t * 0.5 * (p.a() + p.b());
    Ok(unreflected_endpoint(State::new(xi0, w), horizon, p, rng)?.position)
}

/// Two-sample KS between `n` rescaled telegraph endpoints and `n` oracle
/// endpoints at time `t`.
pub fn scaling_limit_check(
    n_scale: f64,
    c: f64,
    t: f64,
    n: usize,
    xi0: f64,
    dt: f64,
    seed: u64,
) -> Result<ScalingCheck> {
    let a = n_scale - c;
    if !(a > 0.0) {
        return Err(invalid(format!(
            "scale too small: a_N = N - c = {a} must be > 0"
        )));
    }
    if !(c >= 0.0) {
        return Err(invalid(format!("drift c must be >= 0, got {c}")));
    }
    check(c, xi0, dt, t)?;
    let p = ModelParams::new(a, n_scale + c)?;
    let tele = try_par_map(seed, domain::SCALING, n, |rng, _| {
        rescaled_endpoint(&p, xi0, t, rng)
    })?;
    let oracle = sde_oracle(c, xi0, dt, t, n, seed)?;
    let ks = ks_two_sample(&tele, &oracle)?;
    Ok(ScalingCheck {
        n_scale,
        c,
        t,
        ks_stat: ks.statistic,
        p_value: ks.p_value,
    })
}
