//! Certificate constants for the tracking error dynamics.
//!
//! With `D_o`, `D_bar` the bounds of the dilution law,
//!
//! ```text
//! c     = 8 (1/2 + D_bar/D_o)^2
//! kappa = 4 + max{ 112 m/(4a+1), 16 m (4a+3)(a+2) / (a (4a+1)^2) }
//! C1    = min{ 1, kappa/200, m a / (2 (4a+3)(a+2)) }
//! ubar_max = min{ C1 / sqrt(8 (1 + 2 c kappa C1)), D_o/2 }
//! C2    = (1/C1 + 2 kappa c) ubar
//! C5    = min{ C4, C1/8 }
//! ```
//!
//! `C3` and `C4` have no closed form; they are minima of two ratios over the
//! compact set `K = {(e^xi - 1)^2 + z^2 <= 1/2}`, see [`compact`].

pub mod compact;
pub mod envelope;
pub mod lyapunov;
pub mod multi;
pub mod verify;

use serde::{Deserialize, Serialize};

use crate::controller::dilution_bounds;
use crate::disturbance::DisturbanceMode;
use crate::error::{ChemostatError, Result};
use crate::model::ModelParams;

pub use compact::{compact_set_constants, CompactSetConstants};
pub use envelope::{IissEnvelope, IssEnvelope};
pub use lyapunov::{lyapunov, LyapunovValues};
pub use multi::{multi_certificate, MultiCertificate};
pub use verify::{
    check_decay, check_extinction, check_invariance, check_iss, delta2_integral, iiss_check,
    settling_time, VerificationReport, CHECK_TOLERANCE,
};

/// `(c, kappa, C1)`.
pub fn constants(params: &ModelParams) -> (f64, f64, f64) {
    let (m, a) = (params.m(), params.a());
    let (d_o, d_bar) = dilution_bounds(params);
    let c = 8.0 * (0.5 + d_bar / d_o).powi(2);
    let kappa = 4.0
        + f64::max(
            112.0 * m / (4.0 * a + 1.0),
            16.0 * m * (4.0 * a + 3.0) * (a + 2.0) / (a * (4.0 * a + 1.0).powi(2)),
        );
    let c1 = 1.0f64
        .min(kappa / 200.0)
        .min(m * a / (2.0 * (4.0 * a + 3.0) * (a + 2.0)));
    (c, kappa, c1)
}

/// Upper limit on the disturbance sup-norm for the ISS certificate.
pub fn disturbance_cap(params: &ModelParams) -> f64 {
    let (c, kappa, c1) = constants(params);
    let (d_o, _) = dilution_bounds(params);
    (c1 / (8.0 * (1.0 + 2.0 * c * kappa * c1)).sqrt()).min(0.5 * d_o)
}

/// Admissible range `(0, limit)` of `ubar` for a disturbance mode.
pub fn ubar_limit(params: &ModelParams, mode: DisturbanceMode) -> f64 {
    match mode {
        DisturbanceMode::Iss => disturbance_cap(params),
        DisturbanceMode::Iiss => 1.0f64.min(dilution_bounds(params).0),
    }
}

/// Disturbance gain `C2 = (1/C1 + 2 kappa c) ubar`.
pub fn disturbance_gain(params: &ModelParams, ubar: f64) -> f64 {
    let (c, kappa, c1) = constants(params);
    (1.0 / c1 + 2.0 * kappa * c) * ubar
}

/// `(C2, C3, C4, C5)` for an ISS-admissible `ubar`.
pub fn decay_constants(params: &ModelParams, ubar: f64) -> Result<(f64, f64, f64, f64)> {
    check_ubar(params, ubar, DisturbanceMode::Iss)?;
    let (_, _, c1) = constants(params);
    let compact = compact_set_constants(params, ubar)?;
    let c5 = compact.c4.min(c1 / 8.0);
    Ok((disturbance_gain(params, ubar), compact.c3, compact.c4, c5))
}

fn check_ubar(params: &ModelParams, ubar: f64, mode: DisturbanceMode) -> Result<()> {
    let limit = ubar_limit(params, mode);
    if !(ubar > 0.0 && ubar < limit) {
        return Err(ChemostatError::DisturbanceOutOfRange {
            ubar,
            limit,
            mode: mode.as_str().to_string(),
        });
    }
    Ok(())
}

/// Every constant of the certificate, with the disturbance bound in force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub m: f64,
    pub a: f64,
    pub mode: DisturbanceMode,
    pub d_o: f64,
    pub d_bar: f64,
    pub c: f64,
    pub kappa: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub ubar: f64,
    pub ubar_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multi: Option<MultiCertificate>,
}

impl Certificate {
    /// Builds the certificate for `ubar`, defaulting to half of the
    /// admissible limit of `mode`.
    pub fn new(params: ModelParams, ubar: Option<f64>, mode: DisturbanceMode) -> Result<Self> {
        let limit = ubar_limit(&params, mode);
        let ubar = ubar.unwrap_or(0.5 * limit);
        check_ubar(&params, ubar, mode)?;
        let (d_o, d_bar) = dilution_bounds(&params);
        let (c, kappa, c1) = constants(&params);
        let compact = compact_set_constants(&params, ubar)?;
        Ok(Self {
            m: params.m(),
            a: params.a(),
            mode,
            d_o,
            d_bar,
            c,
            kappa,
            c1,
            c2: disturbance_gain(&params, ubar),
            c3: compact.c3,
            c4: compact.c4,
            c5: compact.c4.min(c1 / 8.0),
            ubar,
            ubar_max: disturbance_cap(&params),
            multi: None,
        })
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.m, self.a)
    }

    /// `kappa / (D_o - ubar)`, the weight of `z~^2` in `L3`.
    pub fn z_weight(&self) -> f64 {
        self.kappa / (self.d_o - self.ubar)
    }

    pub fn require_mode(&self, mode: DisturbanceMode) -> Result<()> {
        if self.mode != mode {
            return Err(ChemostatError::ModeMismatch {
                expected: mode.as_str().into(),
                found: self.mode.as_str().into(),
            });
        }
        Ok(())
    }

    pub fn iss_envelope(&self) -> IssEnvelope {
        IssEnvelope::new(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate fields are finite")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cert: Certificate = serde_json::from_str(text)?;
        cert.params()?;
        Ok(cert)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paper_params() -> ModelParams {
        ModelParams::new(10.0, 0.5).unwrap()
    }

    #[test]
    fn constants_at_reference_parameters() {
        let (c, kappa, c1) = constants(&paper_params());
        assert!((c - 98.0).abs() < 1e-12);
        assert!((kappa - 448.444_444_444_444_4).abs() < 1e-9);
        assert_eq!(c1, 0.2);
    }

    #[test]
    fn cap_at_reference_parameters() {
        let cap = disturbance_cap(&paper_params());
        // independent high-precision evaluation: 5.33304554099152e-4
        assert!((cap - 5.333_045_540_991_52e-4).abs() < 1e-15, "{cap}");
        assert!(cap < 7.0 / 6.0);
    }

    #[test]
    fn gain_at_reference_parameters() {
        let c2 = disturbance_gain(&paper_params(), 5e-4);
        assert!((c2 - 43.950_055_555_555_56).abs() < 1e-9, "{c2}");
    }

    #[test]
    fn decay_constants_positive_and_ordered() {
        let p = paper_params();
        let (c2, c3, c4, c5) = decay_constants(&p, 5e-4).unwrap();
        assert!(c2 > 0.0 && c3 > 0.0 && c4 > 0.0 && c5 > 0.0);
        assert!(c5 <= 0.025);
        assert!(c4 <= c3);
        assert!(decay_constants(&p, 1e-3).is_err());
        assert!(decay_constants(&p, 0.0).is_err());
    }

    #[test]
    fn certificate_defaults_and_json() {
        let cert = Certificate::new(paper_params(), None, DisturbanceMode::Iss).unwrap();
        assert_eq!(cert.ubar, 0.5 * cert.ubar_max);
        let text = cert.to_json();
        for key in [
            "d_o", "d_bar", "c", "kappa", "c1", "c2", "c3", "c4", "c5", "ubar", "ubar_max",
        ] {
            assert!(text.contains(&format!("\"{key}\"")), "missing {key}");
        }
        assert_eq!(Certificate::from_json(&text).unwrap(), cert);
    }

    #[test]
    fn iiss_certificate_accepts_large_bound() {
        let cert = Certificate::new(paper_params(), Some(0.5), DisturbanceMode::Iiss).unwrap();
        assert!((cert.c2 - 43_950.055_555_555_56).abs() < 1e-6);
        assert!(Certificate::new(paper_params(), Some(1.0), DisturbanceMode::Iiss).is_err());
        assert!(Certificate::new(paper_params(), Some(0.5), DisturbanceMode::Iss).is_err());
        assert!(cert.require_mode(DisturbanceMode::Iss).is_err());
    }

    fn arb_params() -> impl Strategy<Value = ModelParams> {
        (0.05f64..3.0, 1.05f64..4.0).prop_map(|(a, factor)| {
            ModelParams::new(factor * (4.0 * a + 1.0), a).unwrap()
        })
    }

    proptest! {
        #[test]
        fn half_c_tilde_squared_below_c(p in arb_params(), frac in 0.0f64..=1.0) {
            let (d_o, d_bar) = dilution_bounds(&p);
            let ubar = frac * 0.5 * d_o;
            let c_tilde = 2.0 * (d_bar + ubar) / (d_o - ubar);
            let (c, _, _) = constants(&p);
            prop_assert!(0.5 * c_tilde * c_tilde <= c * (1.0 + 1e-12));
        }

        #[test]
        fn gain_at_cap_respects_decay_budget(p in arb_params()) {
            let cap = disturbance_cap(&p);
            let (_, _, c1) = constants(&p);
            let c2 = disturbance_gain(&p, cap);
            // ubar <= C1 / (8 C2) evaluated at ubar = ubar_max
            prop_assert!(cap <= c1 / (8.0 * c2) * (1.0 + 1e-12));
            prop_assert!(cap > 0.0 && cap < 0.5 * dilution_bounds(&p).0 + 1e-15);
        }
    }
}
