use serde::{Deserialize, Serialize};

use super::Certificate;
use crate::model::ErrorCoords;

/// `L1 = e^xi~ - xi~ - 1`, `L2 = z~^2 / (D_o - ubar)`, `L3 = L1 + kappa L2`,
/// `V = e^L3 - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovValues {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub v: f64,
}

#[inline]
pub fn l1(xi_tilde: f64) -> f64 {
    xi_tilde.exp_m1() - xi_tilde
}

pub fn lyapunov(e: ErrorCoords, cert: &Certificate) -> LyapunovValues {
    let l1 = l1(e.xi_tilde);
    let l2 = e.z_tilde * e.z_tilde / (cert.d_o - cert.ubar);
    let l3 = l1 + cert.kappa * l2;
    LyapunovValues {
        l1,
        l2,
        l3,
        v: l3.exp_m1(),
    }
}

/// `L4 = L1 + 4m/(a D_o) z~^2 + A sum y_i^2` for the multi-species system.
pub fn l4(e: ErrorCoords, y: &[f64], m: f64, a: f64, d_o: f64, weight: f64) -> f64 {
    l1(e.xi_tilde)
        + 4.0 * m / (a * d_o) * e.z_tilde * e.z_tilde
        + weight * y.iter().map(|v| v * v).sum::<f64>()
}
