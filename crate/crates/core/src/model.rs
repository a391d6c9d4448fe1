//! Rate parameters and every closed-form quantity of the model.
//!
//! The process moves at unit speed and flips its velocity at rate `b` while
//! moving away from the origin and at rate `a` while moving towards it.
//! With `b > a` this produces a drift towards the origin and an exponential
//! invariant law. All functions here are pure.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::path::Velocity;

/// Which version of the process a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Process {
    /// Position reflected at the origin, values in `[0, ∞)`.
    Reflected,
    /// Position on the whole real line.
    Unreflected,
}

impl std::str::FromStr for Process {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reflected" => Ok(Process::Reflected),
            "unreflected" => Ok(Process::Unreflected),
            other => Err(invalid(format!("unknown process kind '{other}'"))),
        }
    }
}

/// Value of a Laplace-type transform `λ ↦ E[e^{λT}]` (or of its exponent).
///
/// `Infinite` marks a `λ` beyond the right end of the transform's domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LaplaceValue {
    Finite(f64),
    Infinite,
}

impl LaplaceValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            LaplaceValue::Finite(v) => Some(v),
            LaplaceValue::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, LaplaceValue::Infinite)
    }

    /// The finite value, or `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// The three constants of the total-variation bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    /// Prefactor of the unreflected bound.
    pub c: f64,
    /// Exponential weight on the initial distance to the origin.
    pub r: f64,
    /// Prefactor of the reflected bound.
    pub c_refl: f64,
}

/// Switching rates `(a, b)` with `b >= a > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ModelParams {
    a: f64,
    b: f64,
}

#[derive(Deserialize)]
struct RawParams {
    a: f64,
    b: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.a, raw.b)
    }
}

impl ModelParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b >= a) {
            return Err(Error::InvalidRates { a, b });
        }
        Ok(ModelParams { a, b })
    }

    /// Rate towards the origin.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Rate away from the origin.
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn is_degenerate(&self) -> bool {
        self.a == self.b
    }

    /// Fails with [`Error::Degenerate`] unless `b > a`.
    pub fn require_ergodic(&self) -> Result<()> {
        if self.is_degenerate() {
            Err(Error::Degenerate(self.a))
        } else {
            Ok(())
        }
    }

    /// Right end of the domain of the excursion-length transform, `(√b − √a)²/2`.
    pub fn lambda_c(&self) -> Result<f64> {
        self.require_ergodic()?;
        Ok(self.lambda_c_raw())
    }

    fn lambda_c_raw(&self) -> f64 {
        let d = self.b.sqrt() - self.a.sqrt();
        0.5 * d * d
    }

    /// `(a+b−2λ)² − 4ab`, written as `(b−a)² − 4λ(a+b−λ)` so that it is
    /// exact at λ = 0, and clamped at zero near the boundary.
    /// `None` when λ lies beyond the domain.
    fn discriminant(&self, lambda: f64) -> Option<f64> {
        if lambda > self.lambda_c_raw() {
            return None;
        }
        let k = self.b - self.a;
        let d = k * k - 4.0 * lambda * (self.a + self.b - lambda);
        // λ <= λ_c here, so a negative value is rounding (|d| <= 1e-12 (a+b)²).
        debug_assert!(d >= -1e-12 * (self.a + self.b).powi(2));
        Some(d.max(0.0))
    }

    /// Laplace transform of the excursion length from `(0, +1)`.
    pub fn psi(&self, lambda: f64) -> LaplaceValue {
        match self.discriminant(lambda) {
            None => LaplaceValue::Infinite,
            Some(_) if lambda == 0.0 => LaplaceValue::Finite(1.0),
            Some(d) => {
                // Smaller root of aψ² − sψ + b, written as b/(a·larger root).
                let s = self.a + self.b - 2.0 * lambda;
                LaplaceValue::Finite(2.0 * self.b / (s + d.sqrt()))
            }
        }
    }

    /// Exponent `c(λ)` with `E[e^{λ S_(x,−1)}] = e^{x c(λ)}`.
    pub fn c_lambda(&self, lambda: f64) -> LaplaceValue {
        match self.discriminant(lambda) {
            None => LaplaceValue::Infinite,
            Some(d) => {
                let root = d.sqrt();
                let den = self.b - self.a + root;
                if den == 0.0 {
                    // a == b at λ = 0
                    return LaplaceValue::Finite(0.0);
                }
                // (b−a−√d)/2 rationalised: (b−a)² − d = 4λ(a+b−λ).
                LaplaceValue::Finite(2.0 * lambda * (self.a + self.b - lambda) / den)
            }
        }
    }

    /// Mean excursion length `2/(b − a)`.
    pub fn mean_excursion_length(&self) -> Result<f64> {
        self.require_ergodic()?;
        Ok(2.0 / (self.b - self.a))
    }

    /// Transform of the hitting time of the origin from `(x, v)`.
    pub fn hitting_laplace(&self, x: f64, v: Velocity, lambda: f64) -> Result<LaplaceValue> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(invalid(format!(
                "hitting position must be finite and >= 0, got {x}"
            )));
        }
        let c = match self.c_lambda(lambda) {
            LaplaceValue::Finite(c) => c,
            LaplaceValue::Infinite => return Ok(LaplaceValue::Infinite),
        };
        let base = (x * c).exp();
        Ok(match v {
            Velocity::Neg => LaplaceValue::Finite(base),
            Velocity::Pos => LaplaceValue::Finite(self.psi(lambda).to_f64() * base),
        })
    }

    /// Position-marginal density of the invariant law.
    ///
    /// The velocity marginal is uniform on `{−1, +1}` for both processes, see
    /// [`ModelParams::invariant_velocity_mass`].
    pub fn invariant_density(&self, y: f64, process: Process) -> Result<f64> {
        self.require_ergodic()?;
        let k = self.b - self.a;
        match process {
            Process::Unreflected => Ok(0.5 * k * (-k * y.abs()).exp()),
            Process::Reflected => {
                if y < 0.0 {
                    return Err(invalid(format!("reflected density queried at y = {y} < 0")));
                }
                Ok(k * (-k * y).exp())
            }
        }
    }

    /// Invariant mass of each velocity value.
    pub fn invariant_velocity_mass(&self) -> f64 {
        0.5
    }

    /// CDF of the invariant position marginal.
    pub fn invariant_cdf(&self, y: f64, process: Process) -> Result<f64> {
        self.require_ergodic()?;
        let k = self.b - self.a;
        Ok(match process {
            Process::Reflected => {
                if y <= 0.0 {
                    0.0
                } else {
                    -(-k * y).exp_m1()
                }
            }
            Process::Unreflected => {
                if y < 0.0 {
                    0.5 * (k * y).exp()
                } else {
                    1.0 - 0.5 * (-k * y).exp()
                }
            }
        })
    }

    /// `E_ν[e^{λX}] = (b−a)/(b−a−λ)` for the reflected invariant law.
    pub fn invariant_mgf_reflected(&self, lambda: f64) -> Result<LaplaceValue> {
        self.require_ergodic()?;
        let k = self.b - self.a;
        if lambda >= k {
            return Ok(LaplaceValue::Infinite);
        }
        Ok(LaplaceValue::Finite(k / (k - lambda)))
    }

    pub fn bound_constants(&self) -> Result<BoundConstants> {
        self.require_ergodic()?;
        let (a, b) = (self.a, self.b);
        let sqrt_ab = (a * b).sqrt();
        Ok(BoundConstants {
            c: (b / a).powf(2.5) * (a + b) / (sqrt_ab + b),
            r: (0.75 * (b - a)).max(b - sqrt_ab),
            c_refl: (a + b) * b / (2.0 * a * a),
        })
    }

    /// Total-variation bound between the laws at time `t` started from
    /// positions `x` and `x_tilde`. May exceed 1.
    pub fn tv_bound(&self, t: f64, x: f64, x_tilde: f64, process: Process) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(invalid(format!("time must be >= 0, got {t}")));
        }
        let k = self.bound_constants()?;
        let lc = self.lambda_c_raw();
        let reach = x.abs().max(x_tilde.abs());
        let pre = match process {
            Process::Reflected => {
                if x < 0.0 || x_tilde < 0.0 {
                    return Err(invalid("reflected positions must be >= 0"));
                }
                k.c_refl
            }
            Process::Unreflected => k.c,
        };
        Ok(pre * (k.r * reach - lc * t).exp())
    }

    /// Exact transform `E[e^{λ T̄(x, x̃)}]` of the dominating time, `x >= x̃ >= 0`.
    ///
    /// This is also an upper bound for the transform of the reflected
    /// coalescent coupling time for `λ ∈ [0, λ_c]`.
    pub fn tbar_laplace(&self, lambda: f64, x: f64, x_tilde: f64) -> Result<LaplaceValue> {
        self.require_ergodic()?;
        if !(x >= x_tilde && x_tilde >= 0.0) {
            return Err(invalid(format!(
                "need x >= x~ >= 0, got x = {x}, x~ = {x_tilde}"
            )));
        }
        let (psi, c) = match (self.psi(lambda), self.c_lambda(lambda)) {
            (LaplaceValue::Finite(p), LaplaceValue::Finite(c)) => (p, c),
            _ => return Ok(LaplaceValue::Infinite),
        };
        let (a, b) = (self.a, self.b);
        let den = 2.0 * a + b - lambda - a * psi - c;
        let front = (a + b) * psi * psi / den;
        let expo = x * c + 0.5 * (x + x_tilde) * lambda + 0.5 * (x - x_tilde) * a * (psi - 1.0);
        Ok(LaplaceValue::Finite(front * expo.exp()))
    }

    /// Upper bound on `E[e^{λ S}]` for the unreflected coalescent coupling
    /// time started from positions `y`, `ỹ` (any sign).
    pub fn unreflected_coupling_laplace(
        &self,
        lambda: f64,
        y: f64,
        y_tilde: f64,
    ) -> Result<LaplaceValue> {
        let (hi, lo) = if y.abs() >= y_tilde.abs() {
            (y.abs(), y_tilde.abs())
        } else {
            (y_tilde.abs(), y.abs())
        };
        let tbar = match self.tbar_laplace(lambda, hi, lo)? {
            LaplaceValue::Finite(v) => v,
            LaplaceValue::Infinite => return Ok(LaplaceValue::Infinite),
        };
        let psi = self.psi(lambda).to_f64();
        let c = self.c_lambda(lambda).to_f64();
        let b = self.b;
        Ok(LaplaceValue::Finite(
            tbar * psi * 2.0 * b / (2.0 * b - lambda - c),
        ))
    }
}
