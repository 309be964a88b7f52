//! Closed-loop simulations under the sinusoidal dilution law, with the
//! diagnostic columns filled in from the certificate.

use crate::certificates::lyapunov::l4;
use crate::certificates::{lyapunov, Certificate, MultiCertificate};
use crate::controller::{dilution_sinusoidal, reference_sinusoidal};
use crate::disturbance::DisturbanceSpec;
use crate::error::{ChemostatError, Result};
use crate::integrator::{integrate, IntegratorConfig, OdeSystem, Solution};
use crate::model::{
    error_coords, rhs_error, rhs_multi, rhs_perturbed, AugmentedState, ErrorCoords, ModelParams,
    SpeciesGrowth, State,
};
use crate::trajectory::{Sample, Trajectory, TrajectoryMeta};

/// The disturbed single-species model in `(S, x)`.
pub struct PerturbedSystem<'a> {
    pub params: ModelParams,
    pub disturbance: &'a DisturbanceSpec,
}

impl OdeSystem for PerturbedSystem<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let d = dilution_sinusoidal(t, &self.params);
        let (ds, dx) = rhs_perturbed(State::new(y[0], y[1]), d, self.disturbance.eval(t), &self.params);
        dy[0] = ds;
        dy[1] = dx;
        Ok(())
    }

    fn guarded(&self) -> std::ops::Range<usize> {
        0..2
    }
}

/// The undisturbed model with extra competitors in `(S, x, y_1, .., y_n)`.
pub struct MultiSystem<'a> {
    pub params: ModelParams,
    pub growths: &'a [SpeciesGrowth],
}

impl OdeSystem for MultiSystem<'_> {
    fn dim(&self) -> usize {
        2 + self.growths.len()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let d = dilution_sinusoidal(t, &self.params);
        rhs_multi(y, d, &self.params, self.growths, dy);
        Ok(())
    }

    fn guarded(&self) -> std::ops::Range<usize> {
        0..2
    }
}

/// The error dynamics in `(z~, xi~)`.
pub struct ErrorSystem<'a> {
    pub params: ModelParams,
    pub disturbance: &'a DisturbanceSpec,
}

impl OdeSystem for ErrorSystem<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let d = dilution_sinusoidal(t, &self.params);
        let (dz, dxi) = rhs_error(t, ErrorCoords::new(y[0], y[1]), self.disturbance.eval(t), d, &self.params)?;
        dy[0] = dz;
        dy[1] = dxi;
        Ok(())
    }
}

fn base_sample(t: f64, s: State, params: &ModelParams, u: (f64, f64), cert: &Certificate) -> Result<Sample> {
    let (s_ref, x_ref) = reference_sinusoidal(t);
    let e = error_coords(s, t)?;
    let lv = lyapunov(e, cert);
    Ok(Sample {
        t,
        s: s.s,
        x: s.x,
        s_ref,
        x_ref,
        dilution: dilution_sinusoidal(t, params),
        u1: u.0,
        u2: u.1,
        z_tilde: e.z_tilde,
        xi_tilde: e.xi_tilde,
        l1: lv.l1,
        l2: lv.l2,
        l3: lv.l3,
        v: lv.v,
        y: Vec::new(),
        l4: None,
    })
}

/// Simulates the disturbed model from `s0` and records diagnostics at every
/// recorded knot. The disturbance bound is spot-checked at each knot.
pub fn simulate_single(
    params: ModelParams,
    disturbance: &DisturbanceSpec,
    cert: &Certificate,
    s0: State,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if !s0.is_interior() {
        return Err(ChemostatError::Domain(format!(
            "initial state must be componentwise positive, got ({}, {})",
            s0.s, s0.x
        )));
    }
    let sys = PerturbedSystem { params, disturbance };
    let sol = integrate(&sys, &[s0.s, s0.x], cfg)?;
    let samples = sol
        .t
        .iter()
        .zip(&sol.y)
        .map(|(&t, y)| {
            disturbance.check_at(t)?;
            base_sample(t, State::new(y[0], y[1]), &params, disturbance.eval(t), cert)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        samples,
        species: 0,
        meta: TrajectoryMeta {
            scenario_id: String::new(),
            positivity_retries: sol.positivity_retries,
        },
    })
}

/// Simulates the model with extra competitors. Only the `L4` weight of `mc`
/// is used here; the settling time is determined from the result.
pub fn simulate_multi(
    params: ModelParams,
    growths: &[SpeciesGrowth],
    cert: &Certificate,
    mc: &MultiCertificate,
    s0: &AugmentedState,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if !s0.is_admissible() {
        return Err(ChemostatError::Domain(
            "initial state needs S > 0, x > 0 and y_i >= 0".into(),
        ));
    }
    if s0.y.len() != growths.len() {
        return Err(ChemostatError::InvalidConfig(format!(
            "{} initial competitor values for {} growth laws",
            s0.y.len(),
            growths.len()
        )));
    }
    let sys = MultiSystem { params, growths };
    let sol = integrate(&sys, &s0.to_vec(), cfg)?;
    let samples = sol
        .t
        .iter()
        .zip(&sol.y)
        .map(|(&t, y)| {
            let mut sample = base_sample(t, State::new(y[0], y[1]), &params, (0.0, 0.0), cert)?;
            sample.y = y[2..].to_vec();
            sample.l4 = Some(l4(
                sample.error(),
                &sample.y,
                params.m(),
                params.a(),
                mc.d_o,
                mc.a_weight,
            ));
            Ok(sample)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        samples,
        species: growths.len(),
        meta: TrajectoryMeta {
            scenario_id: String::new(),
            positivity_retries: sol.positivity_retries,
        },
    })
}

/// Integrates the error dynamics directly from `e0`.
pub fn simulate_error(
    params: ModelParams,
    disturbance: &DisturbanceSpec,
    e0: ErrorCoords,
    cfg: &IntegratorConfig,
) -> Result<Solution> {
    let sys = ErrorSystem { params, disturbance };
    integrate(&sys, &[e0.z_tilde, e0.xi_tilde], cfg)
}
