//! Reference trajectory and the open-loop periodic dilution law that makes it
//! an exact solution of the undisturbed chemostat.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{ChemostatError, Result};
use crate::model::ModelParams;

/// Slack allowed when checking reference admissibility on a grid, so that
/// e.g. `x_r(0) = 3/4` computed in floating point is not rejected.
pub const ADMISSIBILITY_SLACK: f64 = 1e-12;

/// `(S_r(t), x_r(t)) = (1/2 - cos(t)/4, 1/2 + cos(t)/4)`.
#[inline]
pub fn reference_sinusoidal(t: f64) -> (f64, f64) {
    let c = t.cos();
    (0.5 - 0.25 * c, 0.5 + 0.25 * c)
}

/// Time derivative of [`reference_sinusoidal`].
#[inline]
pub fn reference_derivative(t: f64) -> (f64, f64) {
    let s = 0.25 * t.sin();
    (s, -s)
}

/// `D(t) = sin t / (2 + cos t) + m (2 - cos t) / (4a + 2 - cos t)`.
#[inline]
pub fn dilution_sinusoidal(t: f64, params: &ModelParams) -> f64 {
    let (s, c) = t.sin_cos();
    s / (2.0 + c) + params.m() * (2.0 - c) / (4.0 * params.a() + 2.0 - c)
}

/// Analytic bounds `(D_o, D_bar)` of the sinusoidal dilution law:
/// `D_o = m/(4a+1) - 1`, `D_bar = 1 + 3m/(4a+3)`.
pub fn dilution_bounds(params: &ModelParams) -> (f64, f64) {
    let (m, a) = (params.m(), params.a());
    (m / (4.0 * a + 1.0) - 1.0, 1.0 + 3.0 * m / (4.0 * a + 3.0))
}

type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A caller-supplied species reference `x_r` together with its exact
/// derivative and a lower bound `ell`. The substrate reference is `1 - x_r`.
#[derive(Clone)]
pub struct ReferenceSpec {
    x_r: TimeFn,
    dx_r: TimeFn,
    ell: f64,
}

impl fmt::Debug for ReferenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReferenceSpec").field("ell", &self.ell).finish_non_exhaustive()
    }
}

impl ReferenceSpec {
    pub fn new<F, G>(x_r: F, dx_r: G, ell: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(ell > 0.0) {
            return Err(ChemostatError::Domain(format!(
                "reference lower bound must be positive, got {ell}"
            )));
        }
        Ok(Self {
            x_r: Arc::new(x_r),
            dx_r: Arc::new(dx_r),
            ell,
        })
    }

    /// `x_r = 1/2 + cos(t)/4` with `ell = 1/4`.
    pub fn sinusoidal() -> Self {
        Self::new(|t| 0.5 + 0.25 * t.cos(), |t| -0.25 * t.sin(), 0.25)
            .expect("ell = 1/4 is positive")
    }

    pub fn x_r(&self, t: f64) -> f64 {
        (self.x_r)(t)
    }

    pub fn dx_r(&self, t: f64) -> f64 {
        (self.dx_r)(t)
    }

    pub fn s_r(&self, t: f64) -> f64 {
        1.0 - self.x_r(t)
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Checks `max{ell, |x_r'(t)|} <= x_r(t) <= 3/4` at one instant.
    pub fn check_at(&self, t: f64) -> Result<()> {
        let x = self.x_r(t);
        let dx = self.dx_r(t);
        let reject = |reason: String| Err(ChemostatError::ReferenceInadmissible { t, reason });
        if !(x.is_finite() && dx.is_finite()) {
            return reject(format!("non-finite reference value x_r={x}, dx_r={dx}"));
        }
        if x > 0.75 + ADMISSIBILITY_SLACK {
            return reject(format!("x_r={x} exceeds 3/4"));
        }
        if x < self.ell - ADMISSIBILITY_SLACK {
            return reject(format!("x_r={x} is below ell={}", self.ell));
        }
        if dx.abs() > x + ADMISSIBILITY_SLACK {
            return reject(format!("|dx_r|={} exceeds x_r={x}", dx.abs()));
        }
        Ok(())
    }
}

/// Sampling grid used to validate a general reference and estimate the
/// bounds of its dilution law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub points: usize,
    /// Multiplies the grid minimum.
    pub lower_safety: f64,
    /// Multiplies the grid maximum.
    pub upper_safety: f64,
}

impl Default for DesignGrid {
    fn default() -> Self {
        Self {
            t_start: 0.0,
            t_end: 2.0 * PI,
            points: 100_000,
            lower_safety: 0.99,
            upper_safety: 1.01,
        }
    }
}

impl DesignGrid {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.points.max(2);
        let span = self.t_end - self.t_start;
        (0..n).map(move |k| self.t_start + span * k as f64 / (n - 1) as f64)
    }
}

#[derive(Clone)]
enum DilutionLaw {
    Sinusoidal(ModelParams),
    General {
        reference: ReferenceSpec,
        params: ModelParams,
    },
}

/// A dilution law with positive lower and upper bounds.
#[derive(Clone)]
pub struct DilutionProfile {
    law: DilutionLaw,
    d_o: f64,
    d_bar: f64,
}

impl fmt::Debug for DilutionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.law {
            DilutionLaw::Sinusoidal(_) => "sinusoidal",
            DilutionLaw::General { .. } => "general",
        };
        f.debug_struct("DilutionProfile")
            .field("law", &kind)
            .field("d_o", &self.d_o)
            .field("d_bar", &self.d_bar)
            .finish()
    }
}

impl DilutionProfile {
    pub fn sinusoidal(params: ModelParams) -> Self {
        let (d_o, d_bar) = dilution_bounds(&params);
        Self {
            law: DilutionLaw::Sinusoidal(params),
            d_o,
            d_bar,
        }
    }

    #[inline]
    pub fn rate(&self, t: f64) -> f64 {
        match &self.law {
            DilutionLaw::Sinusoidal(p) => dilution_sinusoidal(t, p),
            DilutionLaw::General { reference, params } => general_rate(reference, params, t),
        }
    }

    pub fn d_o(&self) -> f64 {
        self.d_o
    }

    pub fn d_bar(&self) -> f64 {
        self.d_bar
    }
}

#[inline]
fn general_rate(reference: &ReferenceSpec, params: &ModelParams, t: f64) -> f64 {
    let x_r = reference.x_r(t);
    -reference.dx_r(t) / x_r + params.mu(1.0 - x_r)
}

/// Dilution law `D(t) = -x_r'(t)/x_r(t) + mu(1 - x_r(t))` for a general
/// admissible reference. Admissibility is checked on `grid`; the bounds are
/// the grid extremes scaled by the grid's safety factors.
pub fn design_general(
    reference: &ReferenceSpec,
    params: &ModelParams,
    grid: &DesignGrid,
) -> Result<DilutionProfile> {
    if !(grid.t_end > grid.t_start) || grid.points < 2 {
        return Err(ChemostatError::Domain(
            "design grid needs t_end > t_start and at least two points".into(),
        ));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for t in grid.times() {
        reference.check_at(t)?;
        let d = general_rate(reference, params, t);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let d_o = lo * grid.lower_safety;
    if !(d_o > 0.0) {
        return Err(ChemostatError::Domain(format!(
            "designed dilution law has non-positive lower bound {d_o}"
        )));
    }
    Ok(DilutionProfile {
        law: DilutionLaw::General {
            reference: reference.clone(),
            params: *params,
        },
        d_o,
        d_bar: hi * grid.upper_safety,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_params() -> ModelParams {
        ModelParams::new(10.0, 0.5).unwrap()
    }

    #[test]
    fn reference_values() {
        assert_eq!(reference_sinusoidal(0.0), (0.25, 0.75));
        let (s, x) = reference_sinusoidal(PI);
        assert!((s - 0.75).abs() < 1e-15 && (x - 0.25).abs() < 1e-15);
        let (s, x) = reference_sinusoidal(PI / 2.0);
        assert!((s - 0.5).abs() < 1e-15 && (x - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dilution_values() {
        let p = paper_params();
        assert!((dilution_sinusoidal(0.0, &p) - 10.0 / 3.0).abs() < 1e-12);
        assert!((dilution_sinusoidal(PI, &p) - 6.0).abs() < 1e-12);
        let (d_o, d_bar) = dilution_bounds(&p);
        assert!((d_o - 7.0 / 3.0).abs() < 1e-15);
        assert!((d_bar - 7.0).abs() < 1e-15);
    }

    #[test]
    fn dilution_within_bounds_and_periodic() {
        let p = paper_params();
        let (d_o, d_bar) = dilution_bounds(&p);
        let n = 10_000;
        for k in 0..n {
            let t = 2.0 * PI * k as f64 / n as f64;
            let d = dilution_sinusoidal(t, &p);
            assert!(d >= d_o && d <= d_bar, "t={t} D={d}");
            assert!((dilution_sinusoidal(t + 2.0 * PI, &p) - d).abs() < 1e-13);
        }
    }

    #[test]
    fn lower_bound_vanishes_at_threshold() {
        let eps = 1e-9;
        let p = ModelParams::new(4.0 * 0.5 + 1.0 + eps, 0.5).unwrap();
        let (d_o, _) = dilution_bounds(&p);
        assert!(d_o > 0.0 && d_o < 1e-8);
    }

    #[test]
    fn general_design_reproduces_sinusoid() {
        let p = paper_params();
        let grid = DesignGrid {
            points: 10_000,
            ..DesignGrid::default()
        };
        let profile = design_general(&ReferenceSpec::sinusoidal(), &p, &grid).unwrap();
        for t in grid.times() {
            assert!((profile.rate(t) - dilution_sinusoidal(t, &p)).abs() < 1e-12);
        }
        assert!(profile.d_o() > 0.0);
        let (d_o, d_bar) = dilution_bounds(&p);
        assert!(profile.d_o() >= 0.99 * d_o && profile.d_bar() <= 1.01 * d_bar);
    }

    #[test]
    fn constant_reference() {
        let p = paper_params();
        let r = ReferenceSpec::new(|_| 0.5, |_| 0.0, 0.5).unwrap();
        let profile = design_general(&r, &p, &DesignGrid::default()).unwrap();
        assert!((profile.rate(3.0) - 5.0).abs() < 1e-12);
        assert!((profile.d_o() - 0.99 * 5.0).abs() < 1e-12);
    }

    #[test]
    fn inadmissible_reference_rejected_with_time() {
        let p = paper_params();
        let r = ReferenceSpec::new(|_| 0.8, |_| 0.0, 0.25).unwrap();
        let err = design_general(&r, &p, &DesignGrid::default()).unwrap_err();
        assert!(matches!(err, ChemostatError::ReferenceInadmissible { t, .. } if t == 0.0));

        // derivative too steep somewhere after t = 0
        let r = ReferenceSpec::new(|t| 0.5 + 0.01 * (5.0 * t).sin(), |t| 0.05 * (5.0 * t).cos() + if t > 1.0 { 1.0 } else { 0.0 }, 0.25).unwrap();
        let err = design_general(&r, &p, &DesignGrid::default()).unwrap_err();
        match err {
            ChemostatError::ReferenceInadmissible { t, .. } => assert!(t > 1.0 && t < 1.001),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn general_design_residual() {
        // x_r = 1/2 + sin(t)/5 keeps 3/10 <= x_r <= 7/10 and |x_r'| <= 1/5
        let p = paper_params();
        let r = ReferenceSpec::new(|t| 0.5 + 0.2 * t.sin(), |t| 0.2 * t.cos(), 0.3).unwrap();
        let grid = DesignGrid::default();
        let profile = design_general(&r, &p, &grid).unwrap();
        for k in 0..1000 {
            let t = k as f64 * 0.0123;
            let x = r.x_r(t);
            let s = 1.0 - x;
            let d = profile.rate(t);
            let ds_ref = -r.dx_r(t);
            let res = (ds_ref - d * (1.0 - s) + p.mu(s) * x).abs()
                + (r.dx_r(t) - x * (p.mu(s) - d)).abs();
            assert!(res < 1e-12, "t={t} residual={res}");
            assert!(d >= profile.d_o() && d <= profile.d_bar());
        }
    }
}
