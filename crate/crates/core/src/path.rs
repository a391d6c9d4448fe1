//! Exact piecewise-linear trajectories.
//!
//! A path is stored as its initial state plus the list of velocity events.
//! Each event also carries the position at which it happens, so evaluation
//! never re-accumulates segment lengths and two paths sharing an event
//! suffix evaluate bit-identically on that suffix.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::Process;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Velocity {
    #[serde(rename = "-1")]
    Neg,
    #[serde(rename = "1")]
    Pos,
}

impl Velocity {
    pub fn sign(self) -> f64 {
        match self {
            Velocity::Neg => -1.0,
            Velocity::Pos => 1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Velocity::Neg => -1,
            Velocity::Pos => 1,
        }
    }

    pub fn flip(self) -> Velocity {
        match self {
            Velocity::Neg => Velocity::Pos,
            Velocity::Pos => Velocity::Neg,
        }
    }

    pub fn from_i8(v: i8) -> Result<Velocity> {
        match v {
            -1 => Ok(Velocity::Neg),
            1 => Ok(Velocity::Pos),
            _ => Err(invalid(format!("velocity must be -1 or 1, got {v}"))),
        }
    }

    /// `Pos` for positive-or-zero arguments, `Neg` otherwise.
    pub fn of_sign(x: f64) -> Velocity {
        if x < 0.0 {
            Velocity::Neg
        } else {
            Velocity::Pos
        }
    }

    pub(crate) fn times(self, other: Velocity) -> Velocity {
        if self == other {
            Velocity::Pos
        } else {
            Velocity::Neg
        }
    }
}

impl fmt::Display for Velocity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_i8())
    }
}

impl std::str::FromStr for Velocity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Velocity> {
        match s.trim() {
            "1" | "+1" | "+" => Ok(Velocity::Pos),
            "-1" | "-" => Ok(Velocity::Neg),
            other => Err(invalid(format!("velocity must be -1 or 1, got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub position: f64,
    pub velocity: Velocity,
}

impl State {
    pub fn new(position: f64, velocity: Velocity) -> State {
        State { position, velocity }
    }
}

/// A velocity update at `time`; `position` is the position at that instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub velocity: Velocity,
    pub position: f64,
}

impl Event {
    /// A reflection of a reflected path at the origin.
    pub fn is_origin_hit(&self) -> bool {
        self.position == 0.0 && self.velocity == Velocity::Pos
    }
}

/// One linear piece `[start, end)` of a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub position: f64,
    pub velocity: Velocity,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn end_position(&self) -> f64 {
        self.position + self.velocity.sign() * self.duration()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePath {
    kind: Process,
    initial: State,
    events: Vec<Event>,
    horizon: f64,
}

impl PiecewisePath {
    pub(crate) fn new(kind: Process, initial: State, events: Vec<Event>, horizon: f64) -> Self {
        PiecewisePath {
            kind,
            initial,
            events,
            horizon,
        }
    }

    pub fn kind(&self) -> Process {
        self.kind
    }

    pub fn initial(&self) -> State {
        self.initial
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// State at time `t`; right-continuous at events.
    pub fn eval(&self, t: f64) -> Result<State> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::OutOfDomain {
                t,
                horizon: self.horizon,
            });
        }
        Ok(self.eval_unchecked(t))
    }

    fn eval_unchecked(&self, t: f64) -> State {
        let k = self.events.partition_point(|e| e.time <= t);
        let (t0, x0, v) = if k == 0 {
            (0.0, self.initial.position, self.initial.velocity)
        } else {
            let e = self.events[k - 1];
            (e.time, e.position, e.velocity)
        };
        let mut x = x0 + v.sign() * (t - t0);
        if self.kind == Process::Reflected {
            x = x.max(0.0);
        }
        State::new(x, v)
    }

    pub fn final_state(&self) -> State {
        self.eval_unchecked(self.horizon)
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        let starts = std::iter::once((0.0, self.initial.position, self.initial.velocity))
            .chain(self.events.iter().map(|e| (e.time, e.position, e.velocity)));
        let ends = self
            .events
            .iter()
            .map(|e| e.time)
            .chain(std::iter::once(self.horizon));
        starts
            .zip(ends)
            .map(|((start, position, velocity), end)| Segment {
                start,
                end,
                position,
                velocity,
            })
    }

    /// Drops every event after `horizon` and shortens the path.
    pub(crate) fn truncate(&mut self, horizon: f64) {
        let k = self.events.partition_point(|e| e.time <= horizon);
        self.events.truncate(k);
        self.horizon = horizon;
    }

    /// Checks the structural invariants; `tol` bounds floating-point slack
    /// in position bookkeeping.
    pub fn validate(&self, tol: f64) -> std::result::Result<(), String> {
        let mut prev_t = 0.0;
        let mut prev_x = self.initial.position;
        let mut prev_v = self.initial.velocity;
        if self.kind == Process::Reflected {
            if prev_x < 0.0 {
                return Err(format!("negative initial position {prev_x}"));
            }
            if prev_x == 0.0 && prev_v == Velocity::Neg {
                return Err("reflected path starts at 0 moving down".into());
            }
        }
        for (i, e) in self.events.iter().enumerate() {
            if !(e.time > prev_t) {
                return Err(format!("event {i} at {} not after {prev_t}", e.time));
            }
            if e.time > self.horizon {
                return Err(format!("event {i} beyond horizon"));
            }
            let expected = prev_x + prev_v.sign() * (e.time - prev_t);
            if (expected - e.position).abs() > tol * (1.0 + e.time) {
                return Err(format!(
                    "event {i}: position {} but unit-speed flow gives {expected}",
                    e.position
                ));
            }
            if self.kind == Process::Reflected {
                if e.position < 0.0 {
                    return Err(format!("event {i}: negative position"));
                }
                // a downward segment must not pass below 0 before its end
                if prev_v == Velocity::Neg && prev_x - (e.time - prev_t) < -tol * (1.0 + e.time) {
                    return Err(format!("segment before event {i} crosses the origin"));
                }
                if e.position == 0.0 && e.velocity != Velocity::Pos {
                    return Err(format!("event {i}: at origin without reflection"));
                }
            }
            prev_t = e.time;
            prev_x = e.position;
            prev_v = e.velocity;
        }
        if self.kind == Process::Reflected
            && prev_v == Velocity::Neg
            && prev_x - (self.horizon - prev_t) < -tol * (1.0 + self.horizon)
        {
            return Err("final segment crosses the origin".into());
        }
        Ok(())
    }

    /// Writes `t,position,velocity` rows: the start, every event, the horizon.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,position,velocity")?;
        writeln!(
            out,
            "{},{},{}",
            0.0, self.initial.position, self.initial.velocity
        )?;
        let mut last_t = 0.0;
        for e in &self.events {
            writeln!(out, "{},{},{}", e.time, e.position, e.velocity)?;
            last_t = e.time;
        }
        if self.horizon > last_t {
            let s = self.final_state();
            writeln!(out, "{},{},{}", self.horizon, s.position, s.velocity)?;
        }
        Ok(())
    }
}

/// Accumulates a path event by event.
#[derive(Debug, Clone)]
pub(crate) struct PathBuilder {
    kind: Process,
    initial: State,
    events: Vec<Event>,
    pub time: f64,
    pub state: State,
}

impl PathBuilder {
    pub fn new(kind: Process, initial: State) -> Self {
        PathBuilder {
            kind,
            initial,
            events: Vec::new(),
            time: 0.0,
            state: initial,
        }
    }

    /// Continues an existing path from its last event.
    pub fn resume(path: PiecewisePath) -> Self {
        let (time, state) = match path.events.last() {
            Some(e) => (e.time, State::new(e.position, e.velocity)),
            None => (0.0, path.initial),
        };
        PathBuilder {
            kind: path.kind,
            initial: path.initial,
            events: path.events,
            time,
            state,
        }
    }

    /// Records an event. An event at the time of the previous one replaces it.
    pub fn push(&mut self, e: Event) {
        debug_assert!(e.time >= self.time);
        match self.events.last_mut() {
            Some(last) if last.time == e.time => *last = e,
            _ if e.time == 0.0 => self.initial = State::new(e.position, e.velocity),
            _ => self.events.push(e),
        }
        self.time = e.time;
        self.state = State::new(e.position, e.velocity);
    }

    /// Position at a time `t >= self.time` on the current segment.
    pub fn position_at(&self, t: f64) -> f64 {
        self.state.position + self.state.velocity.sign() * (t - self.time)
    }

    pub fn finish(self, horizon: f64) -> PiecewisePath {
        let mut p = PiecewisePath::new(self.kind, self.initial, self.events, horizon);
        p.truncate(horizon);
        p
    }
}
