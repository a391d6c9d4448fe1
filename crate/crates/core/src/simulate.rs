//! Exact event-driven simulation of both processes and the path
//! correspondence between them.
//!
//! Between velocity flips the motion is deterministic, so every event time
//! is drawn by inverting an exponential on a constant-rate segment. Origin
//! hits are computed algebraically; when the rate changes at the origin
//! the memoryless property lets us draw a fresh clock for the new segment.

use crate::error::{invalid, Error, Result};
use crate::model::{ModelParams, Process};
use crate::path::{Event, PathBuilder, PiecewisePath, State, Velocity};
use crate::rng::RngStream;

/// Next event of the reflected dynamics from `state` at time `t`.
///
/// Reflections are events at position exactly `0.0` with velocity `+1`.
#[inline]
pub(crate) fn next_reflected(state: State, t: f64, p: &ModelParams, rng: &mut RngStream) -> Event {
    let x = state.position;
    match state.velocity {
        Velocity::Pos => {
            let dt = rng.exp(p.b());
            Event {
                time: t + dt,
                velocity: Velocity::Neg,
                position: x + dt,
            }
        }
        Velocity::Neg => {
            let dt = rng.exp(p.a());
            if dt < x {
                Event {
                    time: t + dt,
                    velocity: Velocity::Pos,
                    position: x - dt,
                }
            } else {
                Event {
                    time: t + x,
                    velocity: Velocity::Pos,
                    position: 0.0,
                }
            }
        }
    }
}

/// Next velocity flip of the unreflected dynamics from `state` at time `t`.
#[inline]
pub(crate) fn next_unreflected(
    state: State,
    t: f64,
    p: &ModelParams,
    rng: &mut RngStream,
) -> Event {
    let y = state.position;
    let w = state.velocity.sign();
    if y * w < 0.0 {
        let dt = rng.exp(p.a());
        let dist = y.abs();
        if dt < dist {
            return Event {
                time: t + dt,
                velocity: state.velocity.flip(),
                position: y + w * dt,
            };
        }
        // Crosses the origin at t + |y|; the rate switches to b there.
        let cross = t + dist;
        let dt = rng.exp(p.b());
        Event {
            time: cross + dt,
            velocity: state.velocity.flip(),
            position: w * dt,
        }
    } else {
        // Moving away from the origin, or sitting on it.
        let dt = rng.exp(p.b());
        Event {
            time: t + dt,
            velocity: state.velocity.flip(),
            position: y + w * dt,
        }
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!(
            "horizon must be finite and > 0, got {horizon}"
        )))
    }
}

fn check_reflected_start(x0: f64, v0: Velocity) -> Result<()> {
    if !(x0 >= 0.0 && x0.is_finite()) {
        return Err(invalid(format!(
            "reflected start must be finite and >= 0, got {x0}"
        )));
    }
    if x0 == 0.0 && v0 == Velocity::Neg {
        return Err(invalid("reflected start at 0 must have velocity +1"));
    }
    Ok(())
}

/// Simulates the unreflected process `(Y, W)` on `[0, horizon]`.
pub fn simulate_unreflected(
    y0: f64,
    w0: Velocity,
    horizon: f64,
    p: &ModelParams,
    rng: &mut RngStream,
) -> Result<PiecewisePath> {
    check_horizon(horizon)?;
    if !y0.is_finite() {
        return Err(invalid("initial position must be finite"));
    }
    let mut b = PathBuilder::new(Process::Unreflected, State::new(y0, w0));
    continue_unreflected(&mut b, horizon, p, rng);
    Ok(b.finish(horizon))
}

/// Simulates the reflected process `(X, V)` on `[0, horizon]`.
pub fn simulate_reflected(
    x0: f64,
    v0: Velocity,
    horizon: f64,
    p: &ModelParams,
    rng: &mut RngStream,
) -> Result<PiecewisePath> {
    check_horizon(horizon)?;
    check_reflected_start(x0, v0)?;
    let mut b = PathBuilder::new(Process::Reflected, State::new(x0, v0));
    continue_reflected(&mut b, horizon, p, rng);
    Ok(b.finish(horizon))
}

/// Extends a reflected builder with fresh dynamics up to `horizon`.
pub(crate) fn continue_reflected(
    b: &mut PathBuilder,
    horizon: f64,
    p: &ModelParams,
    rng: &mut RngStream,
) {
    loop {
        let e = next_reflected(b.state, b.time, p, rng);
        if e.time > horizon {
            break;
        }
        b.push(e);
    }
}

pub(crate) fn continue_unreflected(
    b: &mut PathBuilder,
    horizon: f64,
    p: &ModelParams,
    rng: &mut RngStream,
) {
    loop {
        let e = next_unreflected(b.state, b.time, p, rng);
        if e.time > horizon {
            break;
        }
        b.push(e);
    }
}

/// State of the reflected process at `horizon` without storing the path.
pub fn reflected_endpoint(
    start: State,
    horizon: f64,
    p: &ModelParams,
    rng: &mut RngStream,
) -> Result<State> {
    check_horizon(horizon)?;
    check_reflected_start(start.position, start.velocity)?;
    let (mut t, mut s) = (0.0, start);
    loop {
        let e = next_reflected(s, t, p, rng);
        if e.time > horizon {
            let x = (s.position + s.velocity.sign() * (horizon - t)).max(0.0);
            return Ok(State::new(x, s.velocity));
        }
        t = e.time;
        s = State::new(e.position, e.velocity);
    }
}

/// State of the unreflected process at `horizon` without storing the path.
pub fn unreflected_endpoint(
    start: State,
    horizon: f64,
    p: &ModelParams,
    rng: &mut RngStream,
) -> Result<State> {
    check_horizon(horizon)?;
    let (mut t, mut s) = (0.0, start);
    loop {
        let e = next_unreflected(s, t, p, rng);
        if e.time > horizon {
            return Ok(State::new(
                s.position + s.velocity.sign() * (horizon - t),
                s.velocity,
            ));
        }
        t = e.time;
        s = State::new(e.position, e.velocity);
    }
}

/// Hitting time of the origin for the reflected process from `(x, v)`,
/// simulated event by event. From `(0, +1)` this is an excursion length.
///
/// Aborts after `max_events` flips (relevant only when `b <= a`).
pub fn first_passage_time(
    x: f64,
    v: Velocity,
    p: &ModelParams,
    rng: &mut RngStream,
    max_events: u64,
) -> Result<f64> {
    if x == 0.0 && v == Velocity::Neg {
        return Ok(0.0);
    }
    check_reflected_start(x, v)?;
    let (mut t, mut s) = (0.0, State::new(x, v));
    for _ in 0..max_events {
        let e = next_reflected(s, t, p, rng);
        if e.is_origin_hit() {
            return Ok(e.time);
        }
        t = e.time;
        s = State::new(e.position, e.velocity);
    }
    Err(Error::RecursionCap { cap: max_events })
}

/// The reflected path of one excursion from `(0, +1)`, up to its return.
pub fn excursion_path(
    p: &ModelParams,
    rng: &mut RngStream,
    max_events: u64,
) -> Result<PiecewisePath> {
    let mut b = PathBuilder::new(Process::Reflected, State::new(0.0, Velocity::Pos));
    for _ in 0..max_events {
        let e = next_reflected(b.state, b.time, p, rng);
        let end = e.time;
        let hit = e.is_origin_hit();
        if hit {
            return Ok(b.finish(end));
        }
        b.push(e);
    }
    Err(Error::RecursionCap { cap: max_events })
}

/// `X = |Y|`, with a reflection event at every origin crossing of `Y`.
///
/// For `Y₀ = 0` the initial reflected velocity is `+1`.
pub fn reflect_path(path: &PiecewisePath) -> Result<PiecewisePath> {
    if path.kind() != Process::Unreflected {
        return Err(invalid("reflect_path expects an unreflected path"));
    }
    let init = path.initial();
    let v0 = if init.position == 0.0 {
        Velocity::Pos
    } else {
        Velocity::of_sign(init.position).times(init.velocity)
    };
    let mut b = PathBuilder::new(Process::Reflected, State::new(init.position.abs(), v0));
    let (mut t, mut y, mut w) = (0.0, init.position, init.velocity);
    let horizon = path.horizon();
    for e in path
        .events()
        .iter()
        .copied()
        .map(Some)
        .chain(std::iter::once(None))
    {
        let end = e.map_or(horizon, |e| e.time);
        if y * w.sign() < 0.0 {
            let cross = t + y.abs();
            if cross < end || (e.is_none() && cross <= end) {
                b.push(Event {
                    time: cross,
                    velocity: Velocity::Pos,
                    position: 0.0,
                });
            }
        }
        let Some(e) = e else { break };
        let v = if e.position == 0.0 {
            Velocity::Pos
        } else {
            Velocity::of_sign(e.position).times(e.velocity)
        };
        b.push(Event {
            time: e.time,
            velocity: v,
            position: e.position.abs(),
        });
        t = e.time;
        y = e.position;
        w = e.velocity;
    }
    Ok(b.finish(horizon))
}

/// Inverse of [`reflect_path`]: rebuilds `(Y, W)` from `(X, V)` and `y0`,
/// alternating the sign at every origin visit of `X`.
pub fn unreflect_path(path: &PiecewisePath, y0: f64) -> Result<PiecewisePath> {
    if path.kind() != Process::Reflected {
        return Err(invalid("unreflect_path expects a reflected path"));
    }
    let x0 = path.initial().position;
    if (y0.abs() - x0).abs() > 1e-12 * (1.0 + x0) {
        return Err(invalid(format!(
            "|y0| = {} does not match path start {x0}",
            y0.abs()
        )));
    }
    Ok(unreflect_with_sign(path, Velocity::of_sign(y0)))
}

/// Unreflection with an explicit initial sign, `Y₀ = sign · X₀`.
pub(crate) fn unreflect_with_sign(path: &PiecewisePath, sign: Velocity) -> PiecewisePath {
    let init = path.initial();
    let mut s = sign;
    let mut b = PathBuilder::new(
        Process::Unreflected,
        State::new(s.sign() * init.position, s.times(init.velocity)),
    );
    for e in path.events() {
        if e.is_origin_hit() {
            // W is continuous through the origin; only the sign changes.
            s = s.flip();
            continue;
        }
        b.push(Event {
            time: e.time,
            velocity: s.times(e.velocity),
            position: s.sign() * e.position,
        });
    }
    b.finish(path.horizon())
}

/// Sign of `Y` after the last origin visit of the reflected path.
pub(crate) fn final_sign(path: &PiecewisePath, sign: Velocity) -> Velocity {
    let hits = path.events().iter().filter(|e| e.is_origin_hit()).count();
    if hits % 2 == 0 {
        sign
    } else {
        sign.flip()
    }
}
