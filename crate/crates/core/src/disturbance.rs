//! Disturbances `(u1(t), u2(t))` acting on the dilution rate and the inflow
//! concentration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ChemostatError, Result};

/// Which stability notion the declared bound `ubar` is meant to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisturbanceMode {
    Iss,
    Iiss,
}

impl DisturbanceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DisturbanceMode::Iss => "iss",
            DisturbanceMode::Iiss => "iiss",
        }
    }
}

/// Built-in disturbance signals.
#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceKind {
    Zero,
    /// `u1 = amplitude * exp(-rate t)`, `u2 = 0`.
    ExpDecay { amplitude: f64, rate: f64 },
    Const { u1: f64, u2: f64 },
    /// Piecewise constant on `[t0 + k*interval, t0 + (k+1)*interval)`, each
    /// piece drawn uniformly from `[-ubar, ubar]^2`.
    Random {
        seed: u64,
        t0: f64,
        interval: f64,
        values: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSpec {
    kind: DisturbanceKind,
    ubar: f64,
    mode: DisturbanceMode,
}

impl DisturbanceSpec {
    pub fn new(kind: DisturbanceKind, ubar: f64, mode: DisturbanceMode) -> Result<Self> {
        if !(ubar > 0.0 && ubar.is_finite()) {
            return Err(ChemostatError::Domain(format!(
                "disturbance bound must be positive and finite, got {ubar}"
            )));
        }
        Ok(Self { kind, ubar, mode })
    }

    pub fn zero(ubar: f64, mode: DisturbanceMode) -> Result<Self> {
        Self::new(DisturbanceKind::Zero, ubar, mode)
    }

    /// Seeded random disturbance covering `[t0, tf]`.
    pub fn random(
        seed: u64,
        ubar: f64,
        mode: DisturbanceMode,
        t0: f64,
        tf: f64,
        interval: f64,
    ) -> Result<Self> {
        if !(interval > 0.0) || !(tf > t0) {
            return Err(ChemostatError::Domain(format!(
                "random disturbance needs interval > 0 and tf > t0 (interval={interval}, t0={t0}, tf={tf})"
            )));
        }
        let pieces = ((tf - t0) / interval).ceil() as usize + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..pieces)
            .map(|_| {
                let u1: f64 = rng.gen_range(-ubar..=ubar);
                let u2: f64 = rng.gen_range(-ubar..=ubar);
                (u1.clamp(-ubar, ubar), u2.clamp(-ubar, ubar))
            })
            .collect();
        Self::new(
            DisturbanceKind::Random {
                seed,
                t0,
                interval,
                values,
            },
            ubar,
            mode,
        )
    }

    pub fn kind(&self) -> &DisturbanceKind {
        &self.kind
    }

    pub fn ubar(&self) -> f64 {
        self.ubar
    }

    pub fn mode(&self) -> DisturbanceMode {
        self.mode
    }

    #[inline]
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match &self.kind {
            DisturbanceKind::Zero => (0.0, 0.0),
            DisturbanceKind::ExpDecay { amplitude, rate } => (amplitude * (-rate * t).exp(), 0.0),
            DisturbanceKind::Const { u1, u2 } => (*u1, *u2),
            DisturbanceKind::Random {
                t0,
                interval,
                values,
                ..
            } => {
                let k = ((t - t0) / interval).floor().max(0.0) as usize;
                values[k.min(values.len() - 1)]
            }
        }
    }

    /// Spot check of `|u1|, |u2| <= ubar` at one instant.
    pub fn check_at(&self, t: f64) -> Result<()> {
        let (u1, u2) = self.eval(t);
        if u1.abs() > self.ubar || u2.abs() > self.ubar || !u1.is_finite() || !u2.is_finite() {
            return Err(ChemostatError::DisturbanceBound {
                t,
                u1,
                u2,
                ubar: self.ubar,
            });
        }
        Ok(())
    }
}
