//! Normalized single-species chemostat with a disturbed dilution rate and
//! inflow concentration, its multi-species extension, and the transformed
//! error dynamics used by the Lyapunov analysis.
//!
//! All quantities are dimensionless. With `z = S + x` and `xi = ln x`, the
//! tracking error against the reference `(S_r, x_r)` is
//!
//! ```text
//! z~  = S + x - 1          (z_r = S_r + x_r = 1)
//! xi~ = ln x - ln x_r(t)
//! ```

use serde::{Deserialize, Serialize};

use crate::controller::reference_sinusoidal;
use crate::error::{ChemostatError, Result};

/// Below this concentration `ln x` is treated as an extinction signal.
pub const EXTINCTION_FLOOR: f64 = 1e-300;

/// Monod pair `(m, a)` with `m > 4a + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    m: f64,
    a: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    m: f64,
    a: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = ChemostatError;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.m, raw.a)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams { m: p.m, a: p.a }
    }
}

impl ModelParams {
    pub fn new(m: f64, a: f64) -> Result<Self> {
        let invalid = |reason: &str| ChemostatError::InvalidParams {
            m,
            a,
            reason: reason.to_string(),
        };
        if !(m.is_finite() && a.is_finite()) {
            return Err(invalid("parameters must be finite"));
        }
        if m <= 0.0 || a <= 0.0 {
            return Err(invalid("m and a must be positive"));
        }
        if m <= 4.0 * a + 1.0 {
            return Err(invalid("m must exceed 4a+1"));
        }
        Ok(Self { m, a })
    }

    /// Maximal growth rate.
    pub fn m(&self) -> f64 {
        self.m
    }

    /// Half-saturation constant.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Growth rate without the domain check, for hot loops on admissible states.
    #[inline]
    pub fn mu(&self, s: f64) -> f64 {
        self.m * s / (self.a + s)
    }
}

/// Substrate and species concentrations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    #[serde(rename = "S")]
    pub s: f64,
    pub x: f64,
}

impl State {
    pub fn new(s: f64, x: f64) -> Self {
        Self { s, x }
    }

    /// Membership in the open quadrant `(0, inf)^2`.
    pub fn is_interior(&self) -> bool {
        self.s > 0.0 && self.x > 0.0
    }

    /// Membership in the closed quadrant `[0, inf)^2`.
    pub fn is_nonnegative(&self) -> bool {
        self.s >= 0.0 && self.x >= 0.0
    }
}

/// Substrate, tracked species, and `n` competitors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState {
    #[serde(rename = "S")]
    pub s: f64,
    pub x: f64,
    #[serde(default)]
    pub y: Vec<f64>,
}

impl AugmentedState {
    pub fn is_admissible(&self) -> bool {
        self.s > 0.0 && self.x > 0.0 && self.y.iter().all(|&v| v >= 0.0)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 + self.y.len());
        v.push(self.s);
        v.push(self.x);
        v.extend_from_slice(&self.y);
        v
    }
}

/// Monod growth law `nu(S) = m S / (a + S)` of an extra species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeciesGrowth {
    pub m: f64,
    pub a: f64,
}

impl SpeciesGrowth {
    pub fn new(m: f64, a: f64) -> Result<Self> {
        if !(m > 0.0 && a > 0.0 && m.is_finite() && a.is_finite()) {
            return Err(ChemostatError::Domain(format!(
                "species growth needs positive finite (m, a), got ({m}, {a})"
            )));
        }
        Ok(Self { m, a })
    }

    #[inline]
    pub fn rate(&self, s: f64) -> f64 {
        self.m * s / (self.a + s)
    }
}

/// Transformed tracking error `(z~, xi~)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorCoords {
    pub z_tilde: f64,
    pub xi_tilde: f64,
}

impl ErrorCoords {
    pub fn new(z_tilde: f64, xi_tilde: f64) -> Self {
        Self { z_tilde, xi_tilde }
    }

    pub fn norm(&self) -> f64 {
        self.z_tilde.hypot(self.xi_tilde)
    }
}

/// Monod growth rate `m S / (a + S)`.
pub fn monod(s: f64, params: &ModelParams) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(ChemostatError::Domain(format!(
            "substrate concentration must be non-negative, got {s}"
        )));
    }
    Ok(params.mu(s))
}

/// Right-hand side of the disturbed single-species model:
///
/// ```text
/// S' = (D + u1)(1 + u2 - S) - mu(S) x
/// x' = x (mu(S) - D - u1)
/// ```
#[inline]
pub fn rhs_perturbed(s: State, d: f64, u: (f64, f64), params: &ModelParams) -> (f64, f64) {
    let (u1, u2) = u;
    let growth = params.mu(s.s);
    let ds = (d + u1) * (1.0 + u2 - s.s) - growth * s.x;
    let dx = s.x * (growth - d - u1);
    (ds, dx)
}

/// Right-hand side of the undisturbed model with `n` extra species.
/// Writes `(S', x', y_1', .., y_n')` into `out`, which must have length `2 + n`.
pub fn rhs_multi(
    state: &[f64],
    d: f64,
    params: &ModelParams,
    growths: &[SpeciesGrowth],
    out: &mut [f64],
) {
    debug_assert_eq!(state.len(), 2 + growths.len());
    debug_assert_eq!(out.len(), state.len());
    let s = state[0];
    let x = state[1];
    let growth = params.mu(s);
    let mut uptake = growth * x;
    for (i, g) in growths.iter().enumerate() {
        let y = state[2 + i];
        let nu = g.rate(s);
        uptake += nu * y;
        out[2 + i] = y * (nu - d);
    }
    out[0] = d * (1.0 - s) - uptake;
    out[1] = x * (growth - d);
}

/// Transformed tracking error against the sinusoidal reference.
pub fn error_coords(s: State, t: f64) -> Result<ErrorCoords> {
    if !(s.x > 0.0) {
        return Err(ChemostatError::Domain(format!(
            "species concentration must be positive, got {}",
            s.x
        )));
    }
    if s.x < EXTINCTION_FLOOR {
        return Err(ChemostatError::ExtinctionWarning { x: s.x });
    }
    let (_, x_r) = reference_sinusoidal(t);
    Ok(ErrorCoords {
        z_tilde: s.s + s.x - 1.0,
        xi_tilde: s.x.ln() - x_r.ln(),
    })
}

/// Inverse of [`error_coords`].
pub fn reconstruct_state(e: ErrorCoords, t: f64) -> State {
    let (_, x_r) = reference_sinusoidal(t);
    let x = x_r * e.xi_tilde.exp();
    State {
        s: e.z_tilde + 1.0 - x,
        x,
    }
}

/// Error dynamics in `(z~, xi~)`:
///
/// ```text
/// z~'  = -(D + u1)(z~ - u2)
/// xi~' = m a (z~ - x_r (e^xi~ - 1)) / ((a + z - e^xi)(a + 1 - x_r)) - u1
/// ```
///
/// Fails when the reconstructed substrate `z - e^xi` is not positive.
pub fn rhs_error(
    t: f64,
    e: ErrorCoords,
    u: (f64, f64),
    d: f64,
    params: &ModelParams,
) -> Result<(f64, f64)> {
    let (u1, u2) = u;
    let (s_r, x_r) = reference_sinusoidal(t);
    let z = e.z_tilde + 1.0;
    let growth_excess = e.xi_tilde.exp_m1();
    let s = z - x_r * (growth_excess + 1.0);
    if !(s > 0.0) {
        return Err(ChemostatError::LeftDomain { t, s });
    }
    let (m, a) = (params.m(), params.a());
    let dz = -(d + u1) * (e.z_tilde - u2);
    let dxi = m * a * (e.z_tilde - x_r * growth_excess) / ((a + s) * (a + s_r)) - u1;
    Ok((dz, dxi))
}
