//! Explicit Runge-Kutta integration with a positivity guard.
//!
//! Two modes are provided: classical fixed-step RK4 (the default, bit
//! reproducible) and Dormand-Prince 5(4) with PI step-size control. A step
//! whose guarded components fall to or below `positivity_floor`, or whose
//! right-hand side reports a domain error, is retried with half the step,
//! at most `max_halvings` times.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{ChemostatError, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// Components that must stay above the positivity floor.
    fn guarded(&self) -> Range<usize> {
        0..0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    FixedRk4,
    AdaptiveRk45,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub h: f64,
    pub t0: f64,
    pub tf: f64,
    /// Keep every `record_every`-th step (the final step is always kept).
    pub record_every: usize,
    pub mode: StepMode,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub positivity_floor: f64,
    pub max_halvings: u32,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            h: 1e-3,
            t0: 0.0,
            tf: 60.0,
            record_every: 1,
            mode: StepMode::FixedRk4,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            positivity_floor: 1e-12,
            max_halvings: 20,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ChemostatError::InvalidConfig(msg));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("step size must be positive, got {}", self.h));
        }
        if !(self.tf > self.t0) || !self.t0.is_finite() || !self.tf.is_finite() {
            return bad(format!("need t0 < tf, got [{}, {}]", self.t0, self.tf));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(self.positivity_floor >= 0.0) {
            return bad("positivity floor must be non-negative".into());
        }
        Ok(())
    }

    /// The configuration the oracle runs: same algorithm, step `h/100`,
    /// decimation scaled so the recorded knots coincide.
    pub fn refined(&self) -> Self {
        Self {
            h: self.h / 100.0,
            record_every: self.record_every * 100,
            rel_tol: (self.rel_tol * 1e-4).max(1e-15),
            abs_tol: (self.abs_tol * 1e-4).max(1e-18),
            ..*self
        }
    }
}

/// Recorded knots of an integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    /// Number of steps that had to be split because of a positivity breach.
    pub positivity_retries: usize,
    /// Number of accepted steps.
    pub steps: usize,
}

impl Solution {
    pub fn last(&self) -> (f64, &[f64]) {
        let n = self.t.len() - 1;
        (self.t[n], &self.y[n])
    }
}

struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    next: Vec<f64>,
    err: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            next: vec![0.0; n],
            err: vec![0.0; n],
        }
    }
}

pub fn integrate<S: OdeSystem + ?Sized>(sys: &S, y0: &[f64], cfg: &IntegratorConfig) -> Result<Solution> {
    cfg.validate()?;
    if y0.len() != sys.dim() {
        return Err(ChemostatError::InvalidConfig(format!(
            "initial state has {} components, system expects {}",
            y0.len(),
            sys.dim()
        )));
    }
    if !admissible(sys, y0, cfg.positivity_floor) {
        return Err(ChemostatError::IntegrationFailure {
            t: cfg.t0,
            state: y0.to_vec(),
            reason: "initial state outside the admissible domain".into(),
        });
    }
    match cfg.mode {
        StepMode::FixedRk4 => integrate_fixed(sys, y0, cfg),
        StepMode::AdaptiveRk45 => integrate_adaptive(sys, y0, cfg),
    }
}

/// Reference solution: [`integrate`] run with [`IntegratorConfig::refined`].
pub fn oracle_integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Solution> {
    integrate(sys, y0, &cfg.refined())
}

fn admissible<S: OdeSystem + ?Sized>(sys: &S, y: &[f64], floor: f64) -> bool {
    y.iter().all(|v| v.is_finite()) && sys.guarded().all(|i| y[i] > floor)
}

fn integrate_fixed<S: OdeSystem + ?Sized>(sys: &S, y0: &[f64], cfg: &IntegratorConfig) -> Result<Solution> {
    let span = cfg.tf - cfg.t0;
    let mut n_steps = (span / cfg.h).round() as usize;
    if (n_steps as f64 * cfg.h - span).abs() > 1e-9 * span || n_steps == 0 {
        n_steps = (span / cfg.h).ceil() as usize;
    }
    let mut ws = Workspace::new(y0.len());
    let mut y = y0.to_vec();
    let capacity = n_steps / cfg.record_every + 2;
    let mut sol = Solution {
        t: Vec::with_capacity(capacity),
        y: Vec::with_capacity(capacity),
        positivity_retries: 0,
        steps: 0,
    };
    sol.t.push(cfg.t0);
    sol.y.push(y.clone());
    for k in 0..n_steps {
        let t = cfg.t0 + k as f64 * cfg.h;
        let t_next = if k + 1 == n_steps {
            cfg.tf
        } else {
            cfg.t0 + (k + 1) as f64 * cfg.h
        };
        advance_guarded(sys, t, t_next - t, &mut y, 0, cfg, &mut ws, &mut sol.positivity_retries)?;
        sol.steps += 1;
        if (k + 1) % cfg.record_every == 0 || k + 1 == n_steps {
            sol.t.push(t_next);
            sol.y.push(y.clone());
        }
    }
    Ok(sol)
}

#[allow(clippy::too_many_arguments)]
fn advance_guarded<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    h: f64,
    y: &mut Vec<f64>,
    depth: u32,
    cfg: &IntegratorConfig,
    ws: &mut Workspace,
    retries: &mut usize,
) -> Result<()> {
    let outcome = rk4_step(sys, t, h, y, ws);
    let ok = outcome.is_ok() && admissible(sys, &ws.next, cfg.positivity_floor);
    if ok {
        std::mem::swap(y, &mut ws.next);
        return Ok(());
    }
    if depth >= cfg.max_halvings {
        let reason = match outcome {
            Err(e) => e.to_string(),
            Ok(()) => format!("positivity floor {} breached", cfg.positivity_floor),
        };
        return Err(ChemostatError::IntegrationFailure {
            t,
            state: y.clone(),
            reason: format!("{reason} after {depth} step halvings"),
        });
    }
    *retries += 1;
    let half = 0.5 * h;
    advance_guarded(sys, t, half, y, depth + 1, cfg, ws, retries)?;
    advance_guarded(sys, t + half, h - half, y, depth + 1, cfg, ws, retries)
}

/// One classical RK4 step from `y`, written to `ws.next`.
fn rk4_step<S: OdeSystem + ?Sized>(sys: &S, t: f64, h: f64, y: &[f64], ws: &mut Workspace) -> Result<()> {
    let n = y.len();
    let [k1, k2, k3, k4, ..] = &mut ws.k;
    sys.rhs(t, y, k1)?;
    for i in 0..n {
        ws.tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    sys.rhs(t + 0.5 * h, &ws.tmp, k2)?;
    for i in 0..n {
        ws.tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    sys.rhs(t + 0.5 * h, &ws.tmp, k3)?;
    for i in 0..n {
        ws.tmp[i] = y[i] + h * k3[i];
    }
    sys.rhs(t + h, &ws.tmp, k4)?;
    for i in 0..n {
        ws.next[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step; returns the scaled RMS error estimate.
fn dopri_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    h: f64,
    y: &[f64],
    cfg: &IntegratorConfig,
    ws: &mut Workspace,
) -> Result<f64> {
    let n = y.len();
    for stage in 0..7 {
        for i in 0..n {
            let mut acc = y[i];
            for (j, a) in A[stage].iter().enumerate().take(stage) {
                acc += h * a * ws.k[j][i];
            }
            ws.tmp[i] = acc;
        }
        let (done, rest) = ws.k.split_at_mut(stage);
        let _ = done;
        sys.rhs(t + C[stage] * h, &ws.tmp, &mut rest[0])?;
    }
    let mut sum = 0.0;
    for i in 0..n {
        let mut hi = y[i];
        let mut lo = y[i];
        for s in 0..7 {
            hi += h * B5[s] * ws.k[s][i];
            lo += h * B4[s] * ws.k[s][i];
        }
        ws.next[i] = hi;
        ws.err[i] = hi - lo;
        let scale = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(hi.abs());
        sum += (ws.err[i] / scale).powi(2);
    }
    Ok((sum / n as f64).sqrt())
}

fn integrate_adaptive<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Solution> {
    const SAFETY: f64 = 0.9;
    const BETA: f64 = 0.04;
    const ALPHA: f64 = 0.2 - 0.75 * BETA;
    const FAC_MIN: f64 = 0.2;
    const FAC_MAX: f64 = 10.0;

    let span = cfg.tf - cfg.t0;
    let h_min = span * 1e-14;
    let mut ws = Workspace::new(y0.len());
    let mut y = y0.to_vec();
    let mut t = cfg.t0;
    let mut h = cfg.h.min(span);
    let mut err_prev: f64 = 1e-4;
    let mut consecutive_breaches = 0u32;
    let mut sol = Solution {
        t: vec![t],
        y: vec![y.clone()],
        positivity_retries: 0,
        steps: 0,
    };
    while t < cfg.tf {
        let last = t + h >= cfg.tf;
        if last {
            h = cfg.tf - t;
        }
        let step = dopri_step(sys, t, h, &y, cfg, &mut ws);
        let breach = match &step {
            Ok(_) => !admissible(sys, &ws.next, cfg.positivity_floor),
            Err(_) => true,
        };
        if breach {
            consecutive_breaches += 1;
            sol.positivity_retries += 1;
            if consecutive_breaches > cfg.max_halvings || h * 0.5 < h_min {
                let reason = match step {
                    Err(e) => e.to_string(),
                    Ok(_) => format!("positivity floor {} breached", cfg.positivity_floor),
                };
                return Err(ChemostatError::IntegrationFailure {
                    t,
                    state: y,
                    reason: format!("{reason} after {consecutive_breaches} step halvings"),
                });
            }
            h *= 0.5;
            continue;
        }
        consecutive_breaches = 0;
        let err = step.expect("checked above");
        if err <= 1.0 {
            t = if last { cfg.tf } else { t + h };
            std::mem::swap(&mut y, &mut ws.next);
            sol.steps += 1;
            if sol.steps % cfg.record_every == 0 || t >= cfg.tf {
                sol.t.push(t);
                sol.y.push(y.clone());
            }
            let fac = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err.powf(-ALPHA) * err_prev.powf(BETA)).clamp(FAC_MIN, FAC_MAX)
            };
            err_prev = err.max(1e-4);
            h *= fac;
        } else {
            h *= (SAFETY * err.powf(-ALPHA)).clamp(FAC_MIN, 1.0);
            if h < h_min {
                return Err(ChemostatError::IntegrationFailure {
                    t,
                    state: y,
                    reason: "step size underflow in adaptive integration".into(),
                });
            }
        }
    }
    Ok(sol)
}
