//! Pointwise checks of the certified inequalities along recorded
//! trajectories.
//!
//! Every check reduces to a signed margin per sample (positive means the
//! inequality holds with room to spare) and reports the worst one. Margins
//! that overflow are clamped to `±f64::MAX` so reports stay valid JSON.

use serde::{Deserialize, Serialize};

use super::{Certificate, IissEnvelope, IssEnvelope, MultiCertificate};
use crate::disturbance::DisturbanceMode;
use crate::error::{ChemostatError, Result};
use crate::model::{error_coords, rhs_error, ErrorCoords, State};
use crate::trajectory::{Sample, Trajectory};

/// Absolute tolerance of the inequality checks.
pub const CHECK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub n_samples: usize,
    pub worst_margin: f64,
    pub pass: bool,
    pub tolerance: f64,
    pub worst_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_state: Option<Vec<f64>>,
    /// Samples with `(e^xi~ - 1)^2 + z~^2 >= 1/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_1b: Option<usize>,
    /// Samples with `(e^xi~ - 1)^2 + z~^2 < 1/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_2b: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<VerificationReport>,
}

fn clamp_margin(m: f64) -> f64 {
    if m.is_nan() {
        -f64::MAX
    } else {
        m.clamp(-f64::MAX, f64::MAX)
    }
}

struct Worst {
    check: &'static str,
    tolerance: f64,
    n: usize,
    margin: f64,
    at: Option<(f64, Vec<f64>)>,
}

impl Worst {
    fn new(check: &'static str, tolerance: f64) -> Self {
        Self {
            check,
            tolerance,
            n: 0,
            margin: f64::MAX,
            at: None,
        }
    }

    fn push(&mut self, sample: &Sample, margin: f64) {
        let margin = clamp_margin(margin);
        self.n += 1;
        if margin < self.margin || self.at.is_none() {
            self.margin = margin;
            self.at = Some((sample.t, sample.state_vec()));
        }
    }

    fn finish(self) -> VerificationReport {
        let pass = self.margin >= -self.tolerance;
        self.finish_with(pass)
    }

    fn finish_with(self, pass: bool) -> VerificationReport {
        let (worst_t, worst_state) = match self.at {
            Some((t, s)) => (Some(t), Some(s)),
            None => (None, None),
        };
        VerificationReport {
            check: self.check.into(),
            n_samples: self.n,
            worst_margin: self.margin,
            pass,
            tolerance: self.tolerance,
            worst_t,
            worst_state,
            case_1b: None,
            case_2b: None,
            components: Vec::new(),
        }
    }
}

/// `S > 0` and `x > 0` at every sample.
pub fn check_invariance(traj: &Trajectory) -> VerificationReport {
    let mut w = Worst::new("invariance", 0.0);
    for s in &traj.samples {
        w.push(s, s.s.min(s.x));
    }
    let pass = w.n > 0 && w.margin > 0.0;
    w.finish_with(pass)
}

fn sample_error(sample: &Sample) -> Result<ErrorCoords> {
    error_coords(State::new(sample.s, sample.x), sample.t)
}

fn sample_disturbance(sample: &Sample) -> Result<(f64, f64)> {
    if sample.u1.is_nan() || sample.u2.is_nan() {
        return Err(ChemostatError::MissingData(format!(
            "disturbance is missing at t={}",
            sample.t
        )));
    }
    Ok((sample.u1, sample.u2))
}

/// Decay inequality `V' <= -C5 V + C2 |u|` with `V'` from the chain rule on
/// the error dynamics.
///
/// Because `V = e^L3 - 1` overflows far from the reference, the inequality is
/// evaluated divided by `e^L3`:
/// `-C5 (1 - e^-L3) + C2 |u| e^-L3 - L3' >= 0`. The reported margin is this
/// quantity multiplied back by `e^L3`.
pub fn check_decay(traj: &Trajectory, cert: &Certificate) -> Result<VerificationReport> {
    let params = cert.params()?;
    let k = cert.z_weight();
    let mut w = Worst::new("decay", CHECK_TOLERANCE);
    let (mut case_1b, mut case_2b) = (0, 0);
    for sample in &traj.samples {
        let u = sample_disturbance(sample)?;
        let e = sample_error(sample)?;
        let (dz, dxi) = rhs_error(sample.t, e, u, sample.dilution, &params)?;
        let growth = e.xi_tilde.exp_m1();
        let dl3 = growth * dxi + 2.0 * k * e.z_tilde * dz;
        let l3 = (growth - e.xi_tilde) + k * e.z_tilde * e.z_tilde;
        let shrink = (-l3).exp();
        let u_norm = u.0.hypot(u.1);
        let scaled = -cert.c5 * (-(-l3).exp_m1()) + cert.c2 * u_norm * shrink - dl3;
        let margin = if scaled == 0.0 { 0.0 } else { scaled * l3.exp() };
        w.push(sample, margin);
        if growth * growth + e.z_tilde * e.z_tilde >= 0.5 {
            case_1b += 1;
        } else {
            case_2b += 1;
        }
    }
    let mut report = w.finish();
    report.case_1b = Some(case_1b);
    report.case_2b = Some(case_2b);
    Ok(report)
}

/// `|(S - S_r, xi~)| <= beta(|e(t0)|, t - t0) + gamma(sup_{[t0, t]} |u|)`,
/// where `e(t0) = (z~, xi~)` at the first sample.
pub fn check_iss(traj: &Trajectory, env: &IssEnvelope) -> Result<VerificationReport> {
    let first = traj.first()?;
    let e0 = sample_error(first)?.norm();
    let mut sup_u = 0.0f64;
    let mut w = Worst::new("iss", CHECK_TOLERANCE);
    for sample in &traj.samples {
        let u = sample_disturbance(sample)?;
        sup_u = sup_u.max(u.0.hypot(u.1));
        let e = sample_error(sample)?;
        let lhs = (sample.s - sample.s_ref).hypot(e.xi_tilde);
        let rhs = env.beta(e0, sample.t - first.t) + env.gamma(sup_u);
        w.push(sample, rhs - lhs);
    }
    Ok(w.finish())
}

/// Cumulative trapezoid integral of `2 C2 |u|` over the sample grid.
pub fn delta2_integral(traj: &Trajectory, c2: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(traj.samples.len());
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for sample in &traj.samples {
        let u = sample_disturbance(sample)?;
        let val = 2.0 * c2 * u.0.hypot(u.1);
        if let Some((t, v)) = prev {
            acc += 0.5 * (sample.t - t) * (v + val);
        }
        prev = Some((sample.t, val));
        out.push(acc);
    }
    Ok(out)
}

/// `delta1(|e(t)|) <= beta(|e(t0)|, t - t0) + int_{t0}^{t} 2 C2 |u|` with the
/// constructed envelope of [`IissEnvelope`].
pub fn iiss_check(traj: &Trajectory, cert: &Certificate) -> Result<VerificationReport> {
    cert.require_mode(DisturbanceMode::Iiss)?;
    let errors = traj
        .samples
        .iter()
        .map(sample_error)
        .collect::<Result<Vec<_>>>()?;
    let e0 = errors
        .first()
        .ok_or_else(|| ChemostatError::MissingData("trajectory has no samples".into()))?
        .norm();
    let r_max = 1.05 * errors.iter().map(ErrorCoords::norm).fold(0.0, f64::max);
    let env = IissEnvelope::new(cert, r_max);
    let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let beta = env.beta_along(e0, &times);
    let integral = delta2_integral(traj, cert.c2)?;
    let mut w = Worst::new("iiss", CHECK_TOLERANCE);
    for (i, sample) in traj.samples.iter().enumerate() {
        let margin = beta[i] + integral[i] - env.delta1(errors[i].norm());
        w.push(sample, margin);
    }
    Ok(w.finish())
}

/// First sample time after which `S <= 1 + epsilon` holds for the rest of
/// the trajectory.
pub fn settling_time(traj: &Trajectory, epsilon: f64) -> Option<f64> {
    let last_bad = traj.samples.iter().rposition(|s| s.s > 1.0 + epsilon);
    match last_bad {
        None => traj.samples.first().map(|s| s.t),
        Some(i) => traj.samples.get(i + 1).map(|s| s.t),
    }
}

/// Extinction of the competitors after the settling time `T`:
///
/// * `precondition`: `S(t) <= 1 + epsilon` for `t >= T`;
/// * `exponential_bound`: `y_i(t) <= y_i(T) e^{-delta (t - T)}`;
/// * `l4_monotone`: `L4` non-increasing from sample to sample;
/// * `terminal`: `|(xi~, z~, y)|` at the last sample below `terminal_threshold`.
pub fn check_extinction(
    traj: &Trajectory,
    mc: &MultiCertificate,
    terminal_threshold: f64,
) -> Result<VerificationReport> {
    if !traj.is_multi() {
        return Err(ChemostatError::MissingData(
            "extinction check needs a multi-species trajectory (y_i and L4 columns)".into(),
        ));
    }
    if traj.species != mc.n {
        return Err(ChemostatError::InvalidConfig(format!(
            "trajectory has {} competitors, certificate covers {}",
            traj.species, mc.n
        )));
    }
    let start = traj
        .samples
        .iter()
        .position(|s| s.t >= mc.t_settle)
        .ok_or_else(|| {
            ChemostatError::MissingData(format!(
                "trajectory ends before the settling time {}",
                mc.t_settle
            ))
        })?;
    let tail = &traj.samples[start..];
    let anchor = &tail[0];

    let mut pre = Worst::new("precondition", 0.0);
    let mut expo = Worst::new("exponential_bound", CHECK_TOLERANCE);
    let mut mono = Worst::new("l4_monotone", CHECK_TOLERANCE);
    for (j, sample) in tail.iter().enumerate() {
        pre.push(sample, 1.0 + mc.epsilon - sample.s);
        let decay = (-mc.delta * (sample.t - anchor.t)).exp();
        let slack = sample
            .y
            .iter()
            .zip(&anchor.y)
            .map(|(y, y_t)| y_t * decay - y)
            .fold(f64::MAX, f64::min);
        expo.push(sample, slack);
        if j > 0 {
            let l4_prev = tail[j - 1].l4.unwrap_or(f64::NAN);
            mono.push(sample, l4_prev - sample.l4.unwrap_or(f64::NAN));
        }
    }
    let last = traj.last()?;
    let e = sample_error(last)?;
    let terminal_norm = (e.xi_tilde * e.xi_tilde
        + e.z_tilde * e.z_tilde
        + last.y.iter().map(|v| v * v).sum::<f64>())
    .sqrt();
    let mut term = Worst::new("terminal", 0.0);
    term.push(last, terminal_threshold - terminal_norm);

    let components = vec![pre.finish(), expo.finish(), mono.finish(), term.finish()];
    let pass = components.iter().all(|c| c.pass);
    let worst = components
        .iter()
        .min_by(|a, b| a.worst_margin.total_cmp(&b.worst_margin))
        .expect("four components");
    Ok(VerificationReport {
        check: "extinction".into(),
        n_samples: tail.len(),
        worst_margin: worst.worst_margin,
        pass,
        tolerance: CHECK_TOLERANCE,
        worst_t: worst.worst_t,
        worst_state: worst.worst_state.clone(),
        case_1b: None,
        case_2b: None,
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::TrajectoryMeta;

    fn sample(t: f64, s: f64, x: f64, u: (f64, f64)) -> Sample {
        let (s_ref, x_ref) = crate::controller::reference_sinusoidal(t);
        let e = error_coords(State::new(s, x), t).unwrap();
        Sample {
            t,
            s,
            x,
            s_ref,
            x_ref,
            dilution: crate::controller::dilution_sinusoidal(t, &crate::model::ModelParams::new(10.0, 0.5).unwrap()),
            u1: u.0,
            u2: u.1,
            z_tilde: e.z_tilde,
            xi_tilde: e.xi_tilde,
            l1: 0.0,
            l2: 0.0,
            l3: 0.0,
            v: 0.0,
            y: Vec::new(),
            l4: None,
        }
    }

    fn traj(samples: Vec<Sample>) -> Trajectory {
        Trajectory {
            samples,
            species: 0,
            meta: TrajectoryMeta::default(),
        }
    }

    #[test]
    fn clamping() {
        assert_eq!(clamp_margin(f64::NAN), -f64::MAX);
        assert_eq!(clamp_margin(f64::INFINITY), f64::MAX);
        assert_eq!(clamp_margin(f64::NEG_INFINITY), -f64::MAX);
        assert_eq!(clamp_margin(-1.5), -1.5);
    }

    #[test]
    fn invariance_flags_boundary() {
        let good = traj(vec![sample(0.0, 1.0, 1.0, (0.0, 0.0))]);
        assert!(check_invariance(&good).pass);
        let mut bad = good.clone();
        bad.samples[0].s = 0.0;
        let r = check_invariance(&bad);
        assert!(!r.pass);
        assert_eq!(r.worst_t, Some(0.0));
    }

    #[test]
    fn missing_disturbance_is_an_error() {
        let cert = Certificate::new(
            crate::model::ModelParams::new(10.0, 0.5).unwrap(),
            None,
            DisturbanceMode::Iss,
        )
        .unwrap();
        let t = traj(vec![sample(0.0, 1.0, 1.0, (f64::NAN, 0.0))]);
        assert!(matches!(check_decay(&t, &cert), Err(ChemostatError::MissingData(_))));
    }

    #[test]
    fn trapezoid_is_exact_for_linear_disturbance() {
        let samples = (0..=10)
            .map(|i| {
                let t = i as f64 * 0.1;
                sample(t, 1.0, 1.0, (0.3 * t, 0.4 * t))
            })
            .collect();
        let integral = delta2_integral(&traj(samples), 2.0).unwrap();
        // 2 * 2 * int_0^1 0.5 t dt = 1
        assert!((integral[10] - 1.0).abs() < 1e-14);
        assert_eq!(integral[0], 0.0);
    }

    #[test]
    fn settling_time_scans_from_the_end() {
        let t = traj(vec![
            sample(0.0, 1.5, 1.0, (0.0, 0.0)),
            sample(1.0, 1.0, 1.0, (0.0, 0.0)),
            sample(2.0, 1.2, 1.0, (0.0, 0.0)),
            sample(3.0, 0.9, 1.0, (0.0, 0.0)),
        ]);
        assert_eq!(settling_time(&t, 0.1), Some(3.0));
        assert_eq!(settling_time(&t, 1.0), Some(0.0));
        let mut never = t.clone();
        never.samples[3].s = 5.0;
        assert_eq!(settling_time(&never, 0.1), None);
    }

    #[test]
    fn report_json_fields() {
        let r = check_invariance(&traj(vec![sample(0.5, 1.0, 2.0, (0.0, 0.0))]));
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["check", "n_samples", "worst_margin", "pass", "worst_t"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["worst_margin"], 1.0);
    }
}
