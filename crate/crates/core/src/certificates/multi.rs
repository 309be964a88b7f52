use serde::{Deserialize, Serialize};

use crate::controller::dilution_bounds;
use crate::error::{ChemostatError, Result};
use crate::model::{ModelParams, SpeciesGrowth};

/// Constants for the extinction of `n` competing species.
///
/// After the settling time `T`, `S(t) <= 1 + epsilon`, so every competitor
/// decays at least like `exp(-delta (t - T))` with
/// `delta = D_o - max_i nu_i(1 + epsilon)`, and
/// `L4 = L1 + 4m/(a D_o) z~^2 + A sum y_i^2` with `A = 16 m n^2 / (a delta)`
/// is non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiCertificate {
    pub epsilon: f64,
    pub t_settle: f64,
    pub delta: f64,
    /// The weight `A` of `sum y_i^2` in `L4`.
    pub a_weight: f64,
    pub n: usize,
    pub d_o: f64,
}

pub fn multi_certificate(
    params: &ModelParams,
    growths: &[SpeciesGrowth],
    epsilon: f64,
    t_settle: f64,
) -> Result<MultiCertificate> {
    if !(epsilon > 0.0) || !t_settle.is_finite() {
        return Err(ChemostatError::Domain(format!(
            "need epsilon > 0 and finite T, got epsilon={epsilon}, T={t_settle}"
        )));
    }
    let (d_o, _) = dilution_bounds(params);
    let mut fastest = 0.0f64;
    for (index, g) in growths.iter().enumerate() {
        let value = g.rate(1.0 + epsilon);
        if value >= d_o {
            return Err(ChemostatError::SpeciesTooFast { index, value, d_o });
        }
        fastest = fastest.max(value);
    }
    let n = growths.len();
    let delta = d_o - fastest;
    let a_weight = 16.0 * params.m() * (n * n) as f64 / (params.a() * delta);
    Ok(MultiCertificate {
        epsilon,
        t_settle,
        delta,
        a_weight,
        n,
        d_o,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_params() -> ModelParams {
        ModelParams::new(10.0, 0.5).unwrap()
    }

    #[test]
    fn single_competitor() {
        let g = [SpeciesGrowth::new(1.0, 1.0).unwrap()];
        let mc = multi_certificate(&paper_params(), &g, 0.1, 0.0).unwrap();
        assert!((mc.delta - 1.809_523_809_523_809_5).abs() < 1e-12);
        assert!((mc.a_weight - 176.842_105_263_157_9).abs() < 1e-9);
        assert_eq!(mc.n, 1);
    }

    #[test]
    fn no_competitors() {
        let mc = multi_certificate(&paper_params(), &[], 0.1, 0.0).unwrap();
        assert!((mc.delta - 7.0 / 3.0).abs() < 1e-15);
        assert_eq!(mc.a_weight, 0.0);
    }

    #[test]
    fn competitor_at_threshold_rejected() {
        // nu(1.1) = m * 1.1 / (1 + 1.1) = D_o  =>  m ~ D_o * 2.1 / 1.1; search
        // nearby doubles for exact equality in floating point
        let (d_o, _) = dilution_bounds(&paper_params());
        let base = d_o * 2.1 / 1.1;
        let m = (-8i64..=8)
            .map(|k| f64::from_bits((base.to_bits() as i64 + k) as u64))
            .find(|&m| SpeciesGrowth { m, a: 1.0 }.rate(1.0 + 0.1) == d_o)
            .expect("some neighbouring double hits D_o exactly");
        let g = [
            SpeciesGrowth::new(0.5, 1.0).unwrap(),
            SpeciesGrowth::new(m, 1.0).unwrap(),
        ];
        match multi_certificate(&paper_params(), &g, 0.1, 0.0) {
            Err(ChemostatError::SpeciesTooFast { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
