//! Coalescent couplings of two copies of the reflected or unreflected
//! process.
//!
//! The reflected coupling runs in two stages. The crossing stage keeps the
//! velocities equal whenever possible and lets the legs move independently
//! otherwise, until the legs meet with opposite velocities. The sticking
//! stage then feeds the same exponential clocks to both legs in swapped
//! order until they glue. The unreflected coupling reuses the reflected one
//! and finishes with a mirror-image clock swap around the origin.
//!
//! Every leg is built event by event from its own valid dynamics, so each
//! `path_i` is a faithful sample of the standalone process. After
//! coalescence both legs receive identical events, which makes them agree
//! bit for bit at every later time.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::excursions::ExcursionSampler;
use crate::model::{ModelParams, Process};
use crate::path::{Event, PathBuilder, PiecewisePath, State, Velocity};
use crate::rng::{domain, try_par_map, RngStream};
use crate::simulate::{final_sign, next_reflected, next_unreflected, unreflect_with_sign};

/// Two coupled paths and the random times of the construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingResult {
    /// First time the legs sit at the same position with opposite
    /// velocities (reflected coordinates).
    pub crossing_time: Option<f64>,
    /// Time from which the legs coincide; absent when beyond the horizon.
    pub coalescence_time: Option<f64>,
    pub crossing_position: Option<f64>,
    /// Duration of the first phase with opposite velocities, when the
    /// coupling starts in one.
    pub first_phase: Option<f64>,
    pub path_1: PiecewisePath,
    pub path_2: PiecewisePath,
    pub horizon: f64,
    /// The legs were exchanged internally so that the upper leg comes first.
    pub swapped: bool,
}

impl CouplingResult {
    pub fn summary(&self) -> CouplingSummary {
        CouplingSummary {
            crossing_time: self.crossing_time,
            coalescence_time: self.coalescence_time,
            crossing_position: self.crossing_position,
            first_phase: self.first_phase,
        }
    }
}

/// The scalar part of a [`CouplingResult`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingSummary {
    pub crossing_time: Option<f64>,
    pub coalescence_time: Option<f64>,
    pub crossing_position: Option<f64>,
    pub first_phase: Option<f64>,
}

impl CouplingSummary {
    /// `T > t`, counting absent coalescence as `T = ∞`.
    pub fn survives(&self, t: f64) -> bool {
        self.coalescence_time.is_none_or(|c| c > t)
    }

    pub fn coalescence_or_inf(&self) -> f64 {
        self.coalescence_time.unwrap_or(f64::INFINITY)
    }
}

/// One draw of the dominating time `T̄(x, x̃)` with its components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominatingTimeSample {
    /// `F ~ Exp(a+b)`.
    pub f: f64,
    /// `Σ(2F)`.
    pub sigma_2f: f64,
    /// `S_(F,−1)`.
    pub hit_from_f: f64,
    /// Two independent excursion lengths `S`, `S̃`.
    pub excursion_1: f64,
    pub excursion_2: f64,
    /// `S_(x,−1)`.
    pub hit_from_x: f64,
    /// `(x+x̃)/2`.
    pub offset: f64,
    /// `Σ(x−x̃)`.
    pub sigma_gap: f64,
    pub total: f64,
}

fn check_reflected(x: f64, v: Velocity) -> Result<()> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(invalid(format!(
            "reflected position must be finite and >= 0, got {x}"
        )));
    }
    if x == 0.0 && v == Velocity::Neg {
        return Err(invalid("reflected state at 0 must have velocity +1"));
    }
    Ok(())
}

fn check_horizon(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("horizon must be finite and > 0, got {h}")))
    }
}

/// Default horizon `50/λ_c`.
pub fn default_horizon(p: &ModelParams) -> Result<f64> {
    Ok(50.0 / p.lambda_c()?)
}

fn flip_at(b: &mut PathBuilder, t: f64) {
    let x = b.position_at(t);
    b.push(Event {
        time: t,
        velocity: b.state.velocity.flip(),
        position: x,
    });
}

fn set_at(b: &mut PathBuilder, t: f64, position: f64, velocity: Velocity) {
    b.push(Event {
        time: t,
        velocity,
        position,
    });
}

/// Pushes the same reflected dynamics to both legs, which must already be
/// identical at time `t`, up to `horizon`.
fn glue_reflected(
    l1: &mut PathBuilder,
    l2: &mut PathBuilder,
    t: f64,
    horizon: f64,
    p: &ModelParams,
    rng: &mut RngStream,
) {
    let mut s = State::new(l1.position_at(t), l1.state.velocity);
    let mut now = t;
    loop {
        let e = next_reflected(s, now, p, rng);
        if e.time > horizon {
            return;
        }
        l1.push(e);
        l2.push(e);
        now = e.time;
        s = State::new(e.position, e.velocity);
    }
}

fn glue_unreflected(
    l1: &mut PathBuilder,
    l2: &mut PathBuilder,
    t: f64,
    horizon: f64,
    p: &ModelParams,
    rng: &mut RngStream,
) {
    let mut s = State::new(l1.position_at(t), l1.state.velocity);
    let mut now = t;
    loop {
        let e = next_unreflected(s, now, p, rng);
        if e.time > horizon {
            return;
        }
        l1.push(e);
        l2.push(e);
        now = e.time;
        s = State::new(e.position, e.velocity);
    }
}

struct Crossing {
    time: Option<f64>,
    position: Option<f64>,
    first_phase: Option<f64>,
}

/// Crossing stage for reflected legs with `top >= bot` at time 0 and
/// distinct states. Returns at the crossing time, or when the next
/// transition lies beyond `horizon`.
fn run_crossing(
    top: &mut PathBuilder,
    bot: &mut PathBuilder,
    horizon: f64,
    p: &ModelParams,
    rng: &mut RngStream,
) -> Crossing {
    let (a, b) = (p.a(), p.b());
    let mut t = 0.0;
    let mut first_phase = None;
    let mut first = true;
    let none = |first_phase| Crossing {
        time: None,
        position: None,
        first_phase,
    };
    loop {
        let (xt, vt) = (top.position_at(t), top.state.velocity);
        let (xb, vb) = (bot.position_at(t), bot.state.velocity);
        if xt == xb && vt != vb {
            return Crossing {
                time: Some(t),
                position: Some(xt),
                first_phase,
            };
        }
        match (vt, vb) {
            (Velocity::Neg, Velocity::Pos) => {
                let gap = xt - xb;
                let f = rng.exp(a + b);
                if first {
                    first_phase = Some(f.min(xb));
                }
                if f >= 0.5 * gap {
                    let tm = t + 0.5 * gap;
                    if tm > horizon {
                        return none(first_phase);
                    }
                    let m = 0.5 * (xt + xb);
                    if tm > t {
                        set_at(top, tm, m, Velocity::Neg);
                        set_at(bot, tm, m, Velocity::Pos);
                    }
                    return Crossing {
                        time: Some(tm),
                        position: Some(m),
                        first_phase,
                    };
                }
                let tf = t + f;
                if tf > horizon {
                    return none(first_phase);
                }
                if rng.bernoulli(a / (a + b)) {
                    flip_at(top, tf);
                } else {
                    flip_at(bot, tf);
                }
                t = tf;
            }
            (Velocity::Pos, Velocity::Neg) => {
                let f = rng.exp(a + b);
                if first {
                    first_phase = Some(f.min(xb));
                }
                if f < xb {
                    let tf = t + f;
                    if tf > horizon {
                        return none(first_phase);
                    }
                    if rng.bernoulli(b / (a + b)) {
                        flip_at(top, tf);
                    } else {
                        flip_at(bot, tf);
                    }
                    t = tf;
                } else {
                    let th = t + xb;
                    if th > horizon {
                        return none(first_phase);
                    }
                    set_at(bot, th, 0.0, Velocity::Pos);
                    t = th;
                }
            }
            _ => {
                // Parallel: the lower leg runs its own dynamics and the upper
                // leg copies every flip until the lower one reflects.
                let mut s = State::new(xb, vb);
                loop {
                    let e = next_reflected(s, t, p, rng);
                    if e.time > horizon {
                        return none(first_phase);
                    }
                    bot.push(e);
                    t = e.time;
                    if e.is_origin_hit() {
                        break;
                    }
                    flip_at(top, t);
                    s = State::new(e.position, e.velocity);
                }
            }
        }
        first = false;
    }
}

/// Sticking stage from `hi = (x, +1)`, `lo = (x, −1)` at time `t`.
/// Returns the coalescence time, or `None` past `horizon`.
fn run_stick(
    hi: &mut PathBuilder,
    lo: &mut PathBuilder,
    t0: f64,
    horizon: f64,
    p: &ModelParams,
    rng: &mut RngStream,
) -> Option<f64> {
    let mut t = t0;
    loop {
        let cur = hi.position_at(t);
        let r = rng.exp(p.a());
        let q = rng.exp(p.b());
        if r < cur {
            let end = t + r + q;
            flip_at(hi, t + q);
            flip_at(lo, t + r);
            let x = cur + q - r;
            set_at(hi, end, x, Velocity::Pos);
            set_at(lo, end, x, Velocity::Neg);
            if end > horizon {
                return None;
            }
            t = end;
        } else {
            let end = t + cur + q;
            flip_at(hi, t + q);
            set_at(lo, t + cur, 0.0, Velocity::Pos);
            let x = lo.position_at(end);
            set_at(lo, end, x, Velocity::Neg);
            set_at(hi, end, x, Velocity::Neg);
            return (end <= horizon).then_some(end);
        }
    }
}

fn reflected_builders(x: f64, v: Velocity, xt: f64, vt: Velocity) -> (PathBuilder, PathBuilder) {
    (
        PathBuilder::new(Process::Reflected, State::new(x, v)),
        PathBuilder::new(Process::Reflected, State::new(xt, vt)),
    )
}

/// Reflected coupling engine. `stop` selects how far to go: crossing only,
/// up to coalescence, or over the whole horizon.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Stop {
    Crossing,
    Coalescence,
    Horizon,
}

fn couple_reflected(
    x: f64,
    v: Velocity,
    xt: f64,
    vt: Velocity,
    horizon: f64,
    stop: Stop,
    p: &ModelParams,
    rng: &mut RngStream,
) -> Result<CouplingResult> {
    check_reflected(x, v)?;
    check_reflected(xt, vt)?;
    check_horizon(horizon)?;
    let swapped = x < xt;
    let (mut top, mut bot) = if swapped {
        reflected_builders(xt, vt, x, v)
    } else {
        reflected_builders(x, v, xt, vt)
    };

    let mut crossing = Crossing {
        time: None,
        position: None,
        first_phase: None,
    };
    let mut coalescence = None;
    if (x, v) == (xt, vt) {
        coalescence = Some(0.0);
    } else {
        crossing = run_crossing(&mut top, &mut bot, horizon, p, rng);
        if stop != Stop::Crossing {
            if let Some(tc) = crossing.time {
                coalescence = if top.state.velocity == Velocity::Pos {
                    run_stick(&mut top, &mut bot, tc, horizon, p, rng)
                } else {
                    run_stick(&mut bot, &mut top, tc, horizon, p, rng)
                };
            }
        }
    }
    let end = match (stop, crossing.time, coalescence) {
        (Stop::Crossing, Some(tc), _) => tc,
        (Stop::Coalescence, _, Some(tcc)) => tcc,
        (Stop::Horizon, _, Some(tcc)) => {
            glue_reflected(&mut top, &mut bot, tcc, horizon, p, rng);
            horizon
        }
        _ => horizon,
    };
    let (mut p1, mut p2) = (top.finish(end), bot.finish(end));
    if swapped {
        std::mem::swap(&mut p1, &mut p2);
    }
    Ok(CouplingResult {
        crossing_time: crossing.time,
        coalescence_time: if stop == Stop::Crossing {
            coalescence.filter(|&c| c == 0.0)
        } else {
            coalescence
        },
        crossing_position: crossing.position,
        first_phase: crossing.first_phase,
        path_1: p1,
        path_2: p2,
        horizon: end,
        swapped,
    })
}

/// Crossing stage only: returns the paths up to the first time the legs
/// meet with opposite velocities (or up to `horizon`).
///
/// Identical starts report coalescence at 0 and no crossing.
pub fn crossing_couple(
    x: f64,
    v: Velocity,
    x_tilde: f64,
    v_tilde: Velocity,
    horizon: f64,
    p: &ModelParams,
    rng: &mut RngStream,
) -> Result<CouplingResult> {
    couple_reflected(x, v, x_tilde, v_tilde, horizon, Stop::Crossing, p, rng)
}

/// Sticking coupling from `(x, +1)` and `(x, −1)`; the paths end at the
/// coalescence time.
///
/// At `x = 0` the second leg starts reflected, i.e. from `(0, +1)`.
pub fn stick_couple(x: f64, p: &ModelParams, rng: &mut RngStream) -> Result<CouplingResult> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(invalid(format!(
            "stick position must be finite and >= 0, got {x}"
        )));
    }
    let lo_v = if x == 0.0 {
        Velocity::Pos
    } else {
        Velocity::Neg
    };
    let (mut hi, mut lo) = reflected_builders(x, Velocity::Pos, x, lo_v);
    let t = run_stick(&mut hi, &mut lo, 0.0, f64::INFINITY, p, rng).expect("infinite horizon");
    Ok(CouplingResult {
        crossing_time: Some(0.0),
        coalescence_time: Some(t),
        crossing_position: Some(x),
        first_phase: None,
        path_1: hi.finish(t),
        path_2: lo.finish(t),
        horizon: t,
        swapped: false,
    })
}

/// Full coalescent coupling of two reflected processes on `[0, horizon]`.
pub fn coalescent_couple_reflected(
    x: f64,
    v: Velocity,
    x_tilde: f64,
    v_tilde: Velocity,
    horizon: f64,
    p: &ModelParams,
    rng: &mut RngStream,
) -> Result<CouplingResult> {
    couple_reflected(x, v, x_tilde, v_tilde, horizon, Stop::Horizon, p, rng)
}

/// Draws `T̄(x, x̃)` from its independent components.
pub fn sample_tbar(
    x: f64,
    x_tilde: f64,
    p: &ModelParams,
    rng: &mut RngStream,
) -> Result<DominatingTimeSample> {
    if !(x >= x_tilde && x_tilde >= 0.0 && x.is_finite()) {
        return Err(invalid(format!(
            "need finite x >= x_tilde >= 0, got x = {x}, x_tilde = {x_tilde}"
        )));
    }
    let s = ExcursionSampler::new(*p);
    let f = rng.exp(p.a() + p.b());
    let sigma_2f = s.sigma(2.0 * f, rng)?;
    let hit_from_f = s.hitting(f, Velocity::Neg, rng)?;
    let excursion_1 = s.excursion_length(rng)?;
    let excursion_2 = s.excursion_length(rng)?;
    let hit_from_x = s.hitting(x, Velocity::Neg, rng)?;
    let offset = 0.5 * (x + x_tilde);
    let sigma_gap = s.sigma(x - x_tilde, rng)?;
    let total =
        f + sigma_2f + hit_from_f + excursion_1 + excursion_2 + hit_from_x + offset + sigma_gap;
    Ok(DominatingTimeSample {
        f,
        sigma_2f,
        hit_from_f,
        excursion_1,
        excursion_2,
        hit_from_x,
        offset,
        sigma_gap,
        total,
    })
}

/// Reflected coordinates of an unreflected state, `(|y|, sgn(y)·w)` with
/// `sgn(0) := w`, together with the sign of `y`.
fn fold(y: f64, w: Velocity) -> (State, Velocity) {
    let sign = if y == 0.0 { w } else { Velocity::of_sign(y) };
    (State::new(y.abs(), sign.times(w)), sign)
}

/// Mirror clock swap for `away` at `w·d` and `toward` at `−w·d`, both with
/// velocity `w`, from time `t`. Returns the coalescence time or `None`
/// past `horizon`.
fn run_mirror_swap(
    away: &mut PathBuilder,
    toward: &mut PathBuilder,
    t0: f64,
    horizon: f64,
    p: &ModelParams,
    rng: &mut RngStream,
) -> Option<f64> {
    let mut t = t0;
    loop {
        let d = away.position_at(t).abs();
        let w = away.state.velocity;
        let r = rng.exp(p.a());
        let q = rng.exp(p.b());
        if r < d {
            let end = t + r + q;
            flip_at(toward, t + r);
            flip_at(away, t + q);
            let y = away.position_at(end);
            set_at(away, end, y, w);
            set_at(toward, end, -y, w);
            if end > horizon {
                return None;
            }
            t = end;
        } else {
            // The toward leg passes through the origin and takes over the
            // away leg's role; the clocks are exchanged.
            let end = t + d + q;
            flip_at(away, t + q);
            let y = toward.position_at(end);
            set_at(toward, end, y, w.flip());
            set_at(away, end, y, w.flip());
            return (end <= horizon).then_some(end);
        }
    }
}

/// Coalescent coupling of two unreflected processes on `[0, horizon]`.
///
/// `crossing_time` and `crossing_position` refer to the reflected stage.
pub fn coalescent_couple_unreflected(
    y: f64,
    w: Velocity,
    y_tilde: f64,
    w_tilde: Velocity,
    horizon: f64,
    p: &ModelParams,
    rng: &mut RngStream,
) -> Result<CouplingResult> {
    couple_unreflected(y, w, y_tilde, w_tilde, horizon, true, p, rng)
}

#[allow(clippy::too_many_arguments)]
fn couple_unreflected(
    y: f64,
    w: Velocity,
    yt: f64,
    wt: Velocity,
    horizon: f64,
    extend: bool,
    p: &ModelParams,
    rng: &mut RngStream,
) -> Result<CouplingResult> {
    if !(y.is_finite() && yt.is_finite()) {
        return Err(invalid("initial positions must be finite"));
    }
    check_horizon(horizon)?;
    let finish =
        |mut l1: PathBuilder, mut l2: PathBuilder, base: CouplingSummary, rng: &mut RngStream| {
            let end = match base.coalescence_time {
                Some(c) if extend => {
                    glue_unreflected(&mut l1, &mut l2, c, horizon, p, rng);
                    horizon
                }
                Some(c) => c,
                None => horizon,
            };
            CouplingResult {
                crossing_time: base.crossing_time,
                coalescence_time: base.coalescence_time,
                crossing_position: base.crossing_position,
                first_phase: base.first_phase,
                path_1: l1.finish(end),
                path_2: l2.finish(end),
                horizon: end,
                swapped: false,
            }
        };
    let unreflected =
        |y: f64, w: Velocity| PathBuilder::new(Process::Unreflected, State::new(y, w));
    let blank = CouplingSummary {
        crossing_time: None,
        coalescence_time: None,
        crossing_position: None,
        first_phase: None,
    };

    if (y, w) == (yt, wt) {
        let base = CouplingSummary {
            coalescence_time: Some(0.0),
            ..blank
        };
        return Ok(finish(unreflected(y, w), unreflected(yt, wt), base, rng));
    }
    if y == -yt && y != 0.0 && w == wt {
        let (mut l1, mut l2) = (unreflected(y, w), unreflected(yt, wt));
        let c = if y * w.sign() > 0.0 {
            run_mirror_swap(&mut l1, &mut l2, 0.0, horizon, p, rng)
        } else {
            run_mirror_swap(&mut l2, &mut l1, 0.0, horizon, p, rng)
        };
        let base = CouplingSummary {
            coalescence_time: c,
            ..blank
        };
        return Ok(finish(l1, l2, base, rng));
    }

    let ((s1, sign1), (s2, sign2)) = (fold(y, w), fold(yt, wt));
    let mut refl = couple_reflected(
        s1.position,
        s1.velocity,
        s2.position,
        s2.velocity,
        horizon,
        Stop::Coalescence,
        p,
        rng,
    )?;
    let base = refl.summary();
    let Some(tcc) = base.coalescence_time else {
        let l1 = PathBuilder::resume(unreflect_with_sign(&refl.path_1, sign1));
        let l2 = PathBuilder::resume(unreflect_with_sign(&refl.path_2, sign2));
        return Ok(finish(l1, l2, base, rng));
    };

    if final_sign(&refl.path_1, sign1) == final_sign(&refl.path_2, sign2) {
        let l1 = PathBuilder::resume(unreflect_with_sign(&refl.path_1, sign1));
        let l2 = PathBuilder::resume(unreflect_with_sign(&refl.path_2, sign2));
        return Ok(finish(l1, l2, base, rng));
    }

    // Mirror images: run the common reflected path to the origin.
    let (mut r1, mut r2) = (
        PathBuilder::resume(refl.path_1.clone()),
        PathBuilder::resume(refl.path_2.clone()),
    );
    let mut t = tcc;
    let mut s = State::new(r1.position_at(t), r1.state.velocity);
    let at_origin = s.position == 0.0 && s.velocity == Velocity::Pos;
    if !at_origin {
        loop {
            let e = next_reflected(s, t, p, rng);
            t = e.time;
            if t > horizon {
                break;
            }
            r1.push(e);
            r2.push(e);
            if e.is_origin_hit() {
                break;
            }
            s = State::new(e.position, e.velocity);
        }
    }
    let reach = t.min(horizon);
    refl.path_1 = r1.finish(reach);
    refl.path_2 = r2.finish(reach);
    let mut l1 = PathBuilder::resume(unreflect_with_sign(&refl.path_1, sign1));
    let mut l2 = PathBuilder::resume(unreflect_with_sign(&refl.path_2, sign2));
    let pending = CouplingSummary {
        coalescence_time: None,
        ..base
    };
    if t > horizon {
        return Ok(finish(l1, l2, pending, rng));
    }

    // Both legs leave the origin in opposite directions; the first flip
    // turns one of them back.
    let t1 = t + rng.exp(2.0 * p.b());
    let l1_turns = rng.bernoulli(0.5);
    let (away, toward) = if l1_turns {
        (&mut l2, &mut l1)
    } else {
        (&mut l1, &mut l2)
    };
    flip_at(toward, t1);
    if t1 > horizon {
        return Ok(finish(l1, l2, pending, rng));
    }
    let c = run_mirror_swap(away, toward, t1, horizon, p, rng);
    Ok(finish(
        l1,
        l2,
        CouplingSummary {
            coalescence_time: c,
            ..base
        },
        rng,
    ))
}

/// Which process a coupling batch runs on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSpec {
    pub process: Process,
    pub start_1: State,
    pub start_2: State,
    pub horizon: f64,
}

/// One coupling run that stops at coalescence (the paths are discarded).
pub fn coupling_summary(
    spec: &CouplingSpec,
    p: &ModelParams,
    rng: &mut RngStream,
) -> Result<CouplingSummary> {
    let (s1, s2) = (spec.start_1, spec.start_2);
    let r = match spec.process {
        Process::Reflected => couple_reflected(
            s1.position,
            s1.velocity,
            s2.position,
            s2.velocity,
            spec.horizon,
            Stop::Coalescence,
            p,
            rng,
        )?,
        Process::Unreflected => couple_unreflected(
            s1.position,
            s1.velocity,
            s2.position,
            s2.velocity,
            spec.horizon,
            false,
            p,
            rng,
        )?,
    };
    Ok(r.summary())
}

/// `n` coupling runs on streams `(seed, COUPLING, i)`.
pub fn coupling_batch(
    spec: &CouplingSpec,
    n: usize,
    p: &ModelParams,
    seed: u64,
) -> Result<Vec<CouplingSummary>> {
    try_par_map(seed, domain::COUPLING, n, |rng, _| {
        coupling_summary(spec, p, rng)
    })
}

/// `n` draws of `T̄(x, x̃)` on streams `(seed, TBAR, i)`.
pub fn tbar_batch(
    x: f64,
    x_tilde: f64,
    n: usize,
    p: &ModelParams,
    seed: u64,
) -> Result<Vec<DominatingTimeSample>> {
    try_par_map(seed, domain::TBAR, n, |rng, _| {
        sample_tbar(x, x_tilde, p, rng)
    })
}

/// `n` sticking-coupling times from `x` on streams `(seed, STICK, i)`.
pub fn stick_batch(x: f64, n: usize, p: &ModelParams, seed: u64) -> Result<Vec<f64>> {
    try_par_map(seed, domain::STICK, n, |rng, _| {
        Ok(stick_couple(x, p, rng)?.horizon)
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

/// Writes `run_id,crossing_time,coalescence_time,crossing_position,coalesced`.
pub fn write_batch_csv<W: std::io::Write>(runs: &[CouplingSummary], mut out: W) -> Result<()> {
    writeln!(
        out,
        "run_id,crossing_time,coalescence_time,crossing_position,coalesced"
    )?;
    for (i, r) in runs.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{}",
            opt(r.crossing_time),
            opt(r.coalescence_time),
            opt(r.crossing_position),
            r.coalescence_time.is_some()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(1.0, 2.0).unwrap()
    }

    fn agree_after(r: &CouplingResult, from: f64) {
        for k in 0..64 {
            let t = (from + (r.horizon - from) * k as f64 / 63.0).min(r.horizon);
            assert_eq!(
                r.path_1.eval(t).unwrap(),
                r.path_2.eval(t).unwrap(),
                "t = {t}"
            );
        }
    }

    #[test]
    fn main_configuration_without_jump_meets_halfway() {
        // Look for a run whose first clock exceeds x/2.
        let p = params();
        for id in 0..200 {
            let mut probe = RngStream::new(8, id);
            if probe.exp(3.0) < 1.5 {
                continue;
            }
            let r = crossing_couple(
                3.0,
                Velocity::Neg,
                0.0,
                Velocity::Pos,
                100.0,
                &p,
                &mut RngStream::new(8, id),
            )
            .unwrap();
            assert_eq!(r.crossing_time, Some(1.5));
            assert_eq!(r.crossing_position, Some(1.5));
            return;
        }
        panic!("no long first clock");
    }

    #[test]
    fn crossing_state_is_opposed() {
        let p = params();
        for id in 0..300 {
            let mut rng = RngStream::new(1, id);
            let (x, xt) = (0.5 + (id % 5) as f64, (id % 3) as f64 * 0.4);
            let v = if id % 2 == 0 {
                Velocity::Pos
            } else {
                Velocity::Neg
            };
            let vt = if id % 4 < 2 {
                Velocity::Pos
            } else {
                Velocity::Neg
            };
            let vt = if xt == 0.0 { Velocity::Pos } else { vt };
            let r = crossing_couple(x, v, xt, vt, 1e4, &p, &mut rng).unwrap();
            let tc = r.crossing_time.unwrap();
            let (s1, s2) = (r.path_1.eval(tc).unwrap(), r.path_2.eval(tc).unwrap());
            assert_eq!(s1.position, s2.position);
            assert_eq!(s1.velocity, s2.velocity.flip());
            r.path_1.validate(1e-9).unwrap();
            r.path_2.validate(1e-9).unwrap();
        }
    }

    #[test]
    fn stick_from_origin_is_one_block() {
        let p = params();
        let q = {
            let mut probe = RngStream::new(4, 4);
            probe.exp(p.a());
            probe.exp(p.b())
        };
        let r = stick_couple(0.0, &p, &mut RngStream::new(4, 4)).unwrap();
        assert_eq!(r.coalescence_time, Some(q));
        assert_eq!(r.path_1.final_state(), State::new(q, Velocity::Neg));
        assert_eq!(r.path_2.final_state(), State::new(q, Velocity::Neg));
    }

    #[test]
    fn stick_paths_are_ordered_and_valid() {
        let p = params();
        for id in 0..200 {
            let r = stick_couple(3.0, &p, &mut RngStream::new(2, id)).unwrap();
            r.path_1.validate(1e-9).unwrap();
            r.path_2.validate(1e-9).unwrap();
            let h = r.horizon;
            for k in 0..=200 {
                let t = (h * k as f64 / 200.0).min(h);
                let (a, b) = (r.path_1.eval(t).unwrap(), r.path_2.eval(t).unwrap());
                assert!(a.position >= b.position - 1e-12);
            }
            assert_eq!(r.path_1.final_state(), r.path_2.final_state());
        }
    }

    #[test]
    fn reflected_coupling_glues_for_good() {
        let p = params();
        for id in 0..100 {
            let r = coalescent_couple_reflected(
                1.0,
                Velocity::Pos,
                0.0,
                Velocity::Pos,
                80.0,
                &p,
                &mut RngStream::new(3, id),
            )
            .unwrap();
            r.path_1.validate(1e-9).unwrap();
            r.path_2.validate(1e-9).unwrap();
            if let Some(c) = r.coalescence_time {
                agree_after(&r, c);
            }
        }
    }

    #[test]
    fn swapped_legs_keep_caller_order() {
        let p = params();
        let r = coalescent_couple_reflected(
            0.5,
            Velocity::Pos,
            2.0,
            Velocity::Neg,
            50.0,
            &p,
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        assert!(r.swapped);
        assert_eq!(r.path_1.initial(), State::new(0.5, Velocity::Pos));
        assert_eq!(r.path_2.initial(), State::new(2.0, Velocity::Neg));
    }

    #[test]
    fn identical_starts_coalesce_immediately() {
        let p = params();
        let r = coalescent_couple_reflected(
            1.0,
            Velocity::Neg,
            1.0,
            Velocity::Neg,
            10.0,
            &p,
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        assert_eq!(r.coalescence_time, Some(0.0));
        assert_eq!(r.path_1, r.path_2);
        let u = coalescent_couple_unreflected(
            -1.0,
            Velocity::Pos,
            -1.0,
            Velocity::Pos,
            10.0,
            &p,
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        assert_eq!(u.path_1, u.path_2);
    }

    #[test]
    fn unreflected_coupling_glues_for_good() {
        let p = params();
        let starts = [
            (1.0, Velocity::Pos, -1.0, Velocity::Neg),
            (1.0, Velocity::Pos, -1.0, Velocity::Pos),
            (0.0, Velocity::Pos, 0.0, Velocity::Neg),
            (2.0, Velocity::Neg, -0.5, Velocity::Neg),
            (3.0, Velocity::Pos, 1.0, Velocity::Neg),
        ];
        for (k, &(y, w, yt, wt)) in starts.iter().enumerate() {
            let mut coalesced = 0;
            for id in 0..100 {
                let r = coalescent_couple_unreflected(
                    y,
                    w,
                    yt,
                    wt,
                    150.0,
                    &p,
                    &mut RngStream::new(k as u64, id),
                )
                .unwrap();
                r.path_1.validate(1e-9).unwrap();
                r.path_2.validate(1e-9).unwrap();
                assert_eq!(r.path_1.initial(), State::new(y, w));
                assert_eq!(r.path_2.initial(), State::new(yt, wt));
                if let Some(c) = r.coalescence_time {
                    coalesced += 1;
                    agree_after(&r, c);
                }
            }
            assert!(coalesced > 50, "start {k}: only {coalesced} coalesced");
        }
    }

    #[test]
    fn tbar_components_add_up() {
        let p = params();
        let mut rng = RngStream::new(5, 0);
        for _ in 0..100 {
            let s = sample_tbar(1.0, 0.0, &p, &mut rng).unwrap();
            let parts = [
                s.f,
                s.sigma_2f,
                s.hit_from_f,
                s.excursion_1,
                s.excursion_2,
                s.hit_from_x,
                s.offset,
                s.sigma_gap,
            ];
            assert!(parts.iter().all(|&c| c >= 0.0));
            assert_eq!(parts.iter().sum::<f64>(), s.total);
        }
        let z = sample_tbar(0.0, 0.0, &p, &mut rng).unwrap();
        assert_eq!((z.offset, z.sigma_gap), (0.0, 0.0));
        assert!(sample_tbar(0.0, 1.0, &p, &mut rng).is_err());
    }

    #[test]
    fn batch_csv_marks_absence() {
        let runs = [CouplingSummary {
            crossing_time: Some(1.0),
            coalescence_time: None,
            crossing_position: Some(0.5),
            first_phase: None,
        }];
        let mut buf = Vec::new();
        write_batch_csv(&runs, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "run_id,crossing_time,coalescence_time,crossing_position,coalesced\n0,1,,0.5,false\n"
        );
    }
}
