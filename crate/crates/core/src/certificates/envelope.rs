//! Comparison-function envelopes for the tracking error.
//!
//! The ISS envelope is the closed form obtained by integrating the decay
//! inequality `V' <= -C5 V + C2 |u|`:
//!
//! ```text
//! Omega(r)   = exp(e^r - 1 - r + k r^2) - 1,             k = kappa / (D_o - ubar)
//! beta(s, t) = 4 sqrt(Omega(s) e^{-C5 t} (1 + 1/k)) + exp(4 sqrt(Omega(s) e^{-C5 t})) - 1
//! gamma(r)   = 4 sqrt(C2 (1 + 1/k) r) + exp(4 sqrt(C2 r)) - 1
//! ```
//!
//! The iISS envelope is constructed numerically. With `V = L3` the error
//! dynamics satisfy `L3' <= -(C1/2) W + C2 |u|` and `W >= (1 - e^{-|e|})^2`.
//! Writing `lmax(r)` / `lmin(r)` for the max / min of `L3` on the circle
//! `|e| = r`, this gives `L3' <= -alpha(L3) + C2 |u|` with
//! `alpha(L) = (C1/2) (1 - exp(-lmax^{-1}(L)))^2`. The comparison solution
//! `phi' = -alpha(phi)` then yields
//!
//! ```text
//! delta1(|e(t)|) <= phi(lmax(|e(t0)|), t - t0) + int_{t0}^{t} 2 C2 |u(r)| dr
//! ```
//!
//! with `delta1 = lmin`. This envelope is conservative: `alpha` is tabulated
//! from below and `phi` is stepped so that it never undershoots the exact
//! comparison solution.

use std::f64::consts::PI;

use super::Certificate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IssEnvelope {
    k: f64,
    c2: f64,
    c5: f64,
}

impl IssEnvelope {
    pub fn new(cert: &Certificate) -> Self {
        Self {
            k: cert.z_weight(),
            c2: cert.c2,
            c5: cert.c5,
        }
    }

    pub fn omega(&self, r: f64) -> f64 {
        (r.exp_m1() - r + self.k * r * r).exp_m1()
    }

    pub fn beta(&self, s: f64, t: f64) -> f64 {
        let decayed = self.omega(s) * (-self.c5 * t).exp();
        if decayed == 0.0 {
            return 0.0;
        }
        4.0 * (decayed * (1.0 + 1.0 / self.k)).sqrt() + (4.0 * decayed.sqrt()).exp_m1()
    }

    pub fn gamma(&self, r: f64) -> f64 {
        4.0 * (self.c2 * (1.0 + 1.0 / self.k) * r).sqrt() + (4.0 * (self.c2 * r).sqrt()).exp_m1()
    }
}

const SPHERE_SCAN: usize = 720;
const ALPHA_TABLE: usize = 4000;

#[derive(Debug, Clone, PartialEq)]
pub struct IissEnvelope {
    k: f64,
    c1: f64,
    c2: f64,
    /// `(r_j, lmax(r_j))` with increasing `r_j`.
    table: Vec<(f64, f64)>,
}

impl IissEnvelope {
    /// Builds the envelope, tabulating `lmax` on `[0, r_max]`.
    pub fn new(cert: &Certificate, r_max: f64) -> Self {
        let mut env = Self {
            k: cert.z_weight(),
            c1: cert.c1,
            c2: cert.c2,
            table: Vec::new(),
        };
        let r_max = r_max.max(1e-6);
        env.table = (0..=ALPHA_TABLE)
            .map(|j| {
                // quadratic spacing resolves small radii
                let s = j as f64 / ALPHA_TABLE as f64;
                let r = r_max * s * s;
                (r, env.sphere_max(r))
            })
            .collect();
        env
    }

    #[inline]
    fn l3_polar(&self, r: f64, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let xi = r * c;
        let z = r * s;
        (xi.exp_m1() - xi) + self.k * z * z
    }

    fn sphere_extremum(&self, r: f64, sign: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        // symmetric in theta -> -theta, so scan [0, pi]
        let f = |theta: f64| sign * self.l3_polar(r, theta);
        let step = PI / SPHERE_SCAN as f64;
        let (mut best_i, mut best) = (0, f(0.0));
        for i in 1..=SPHERE_SCAN {
            let v = f(i as f64 * step);
            if v < best {
                best = v;
                best_i = i;
            }
        }
        let lo = (best_i as f64 - 1.0).max(0.0) * step;
        let hi = (best_i as f64 + 1.0).min(SPHERE_SCAN as f64) * step;
        sign * golden_min(f, lo, hi).min(best)
    }

    /// `delta1(r)`: minimum of `L3` on the circle of radius `r`.
    pub fn delta1(&self, r: f64) -> f64 {
        self.sphere_extremum(r, 1.0)
    }

    /// Maximum of `L3` on the circle of radius `r`.
    pub fn sphere_max(&self, r: f64) -> f64 {
        self.sphere_extremum(r, -1.0)
    }

    pub fn delta2(&self, r: f64) -> f64 {
        2.0 * self.c2 * r
    }

    /// Lower bound for the decay rate of `L3` at level `level`.
    pub fn alpha(&self, level: f64) -> f64 {
        // largest tabulated radius whose circle maximum does not exceed `level`
        let idx = self.table.partition_point(|&(_, lmax)| lmax <= level);
        let r = if idx == 0 { 0.0 } else { self.table[idx - 1].0 };
        0.5 * self.c1 * (-r).exp_m1().powi(2)
    }

    /// `beta(s, times[i] - times[0])` along a sample grid, starting from
    /// `phi(0) = lmax(s)`.
    pub fn beta_along(&self, s: f64, times: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(times.len());
        let mut phi = self.sphere_max(s);
        for (i, &t) in times.iter().enumerate() {
            if i > 0 {
                let h = t - times[i - 1];
                // rate bound at the lowest level reachable within the step
                let floor = (phi - h * self.alpha(phi)).max(0.0);
                phi = (phi - h * self.alpha(floor)).max(0.0);
            }
            out.push(phi);
        }
        out
    }
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disturbance::DisturbanceMode;
    use crate::model::ModelParams;

    fn iss_cert() -> Certificate {
        Certificate::new(ModelParams::new(10.0, 0.5).unwrap(), Some(5e-4), DisturbanceMode::Iss).unwrap()
    }

    fn iiss_cert() -> Certificate {
        Certificate::new(ModelParams::new(10.0, 0.5).unwrap(), Some(0.5), DisturbanceMode::Iiss).unwrap()
    }

    #[test]
    fn vanish_at_zero() {
        let env = iss_cert().iss_envelope();
        assert_eq!(env.omega(0.0), 0.0);
        assert_eq!(env.gamma(0.0), 0.0);
        for t in [0.0, 1.0, 1e3] {
            assert_eq!(env.beta(0.0, t), 0.0);
        }
    }

    #[test]
    fn omega_at_one() {
        let cert = iss_cert();
        let env = cert.iss_envelope();
        let k = cert.kappa / (cert.d_o - cert.ubar);
        assert!((k - 192.231_668_690_909_96).abs() < 1e-9);
        let expected_exponent = std::f64::consts::E - 2.0 + k;
        assert!((env.omega(1.0).ln() - expected_exponent).abs() < 1e-9);
    }

    #[test]
    fn comparison_classes_on_grids() {
        let cert = iss_cert();
        let env = cert.iss_envelope();
        let radii: Vec<f64> = (0..60).map(|i| 1e-8 * 1.4f64.powi(i)).collect();
        for w in radii.windows(2) {
            assert!(env.gamma(w[1]) > env.gamma(w[0]));
            assert!(env.omega(w[1]) > env.omega(w[0]) || env.omega(w[0]).is_infinite());
            assert!(env.beta(w[1], 10.0) >= env.beta(w[0], 10.0));
        }
        assert!(env.gamma(1e6) > 1e6);
        // KL: decays in t, measured on the natural time scale 1/C5
        let scale = 1.0 / cert.c5;
        let mut prev = f64::INFINITY;
        for j in 0..20 {
            let b = env.beta(0.1, scale * j as f64 * 10.0);
            assert!(b <= prev);
            prev = b;
        }
        assert!(env.beta(0.1, scale * 1e3) < 1e-12);
    }

    #[test]
    fn sphere_extrema_bracket_l3() {
        let env = IissEnvelope::new(&iiss_cert(), 3.0);
        for r in [0.01, 0.3, 1.0, 2.5] {
            let lo = env.delta1(r);
            let hi = env.sphere_max(r);
            for i in 0..1000 {
                let theta = 2.0 * PI * i as f64 / 1000.0;
                let v = env.l3_polar(r, theta);
                assert!(v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12));
            }
            // the minimum sits on the negative xi axis for this weight
            let expected = (-r).exp() + r - 1.0;
            assert!((lo - expected).abs() < 1e-12 * (1.0 + expected));
        }
        assert_eq!(env.delta1(0.0), 0.0);
    }

    #[test]
    fn alpha_is_monotone_lower_bound() {
        let env = IissEnvelope::new(&iiss_cert(), 3.0);
        let mut prev = 0.0;
        for i in 0..200 {
            let level = i as f64 * 10.0;
            let a = env.alpha(level);
            assert!(a >= prev && a <= 0.5 * env.c1);
            prev = a;
        }
        assert_eq!(env.alpha(0.0), 0.0);
    }

    #[test]
    fn beta_along_is_non_increasing() {
        let env = IissEnvelope::new(&iiss_cert(), 3.0);
        let times: Vec<f64> = (0..=2000).map(|i| i as f64 * 0.05).collect();
        let b = env.beta_along(2.0, &times);
        assert!((b[0] - env.sphere_max(2.0)).abs() < 1e-12);
        assert!(b.windows(2).all(|w| w[1] <= w[0]));
        assert!(b[2000] < b[0]);
        assert!(env.beta_along(0.0, &times).iter().all(|&v| v == 0.0));
    }
}
