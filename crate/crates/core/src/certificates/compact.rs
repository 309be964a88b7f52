//! Decay constants on the compact set `K = {(xi, z): (e^xi - 1)^2 + z^2 <= 1/2}`.
//!
//! ```text
//! C3 = (C1/2) * inf_K W / L3      with W = (e^xi - 1)^2 + z^2
//! C4 = C3 * inf_K L3 / V          with V = e^L3 - 1
//! ```
//!
//! Both infima are found by brute force on a 2001 x 2001 grid over
//! `[-2, 2] x [-1, 1]` (which contains `K`), then polished by a compass search
//! constrained to `K`. At the origin both ratios are 0/0; the value used
//! there is the smallest directional limit (`min{2, 1/k}` for `W/L3`, `1`
//! for `L3/V`).

use rayon::prelude::*;

use super::constants;
use crate::controller::dilution_bounds;
use crate::error::{ChemostatError, Result};
use crate::model::ModelParams;

pub const GRID_POINTS: usize = 2001;
const XI_RANGE: (f64, f64) = (-2.0, 2.0);
const Z_RANGE: (f64, f64) = (-1.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompactSetConstants {
    pub c3: f64,
    pub c4: f64,
    /// `inf_K W / L3`.
    pub ratio_w_l3: f64,
    /// `inf_K L3 / V`.
    pub ratio_l3_v: f64,
}

/// Evaluates the shape functions for a given `z` weight `k = kappa/(D_o - ubar)`.
#[derive(Debug, Clone, Copy)]
struct Shape {
    k: f64,
}

impl Shape {
    #[inline]
    fn in_set(&self, xi: f64, z: f64) -> bool {
        xi.exp_m1().powi(2) + z * z <= 0.5
    }

    #[inline]
    fn l3(&self, xi: f64, z: f64) -> f64 {
        (xi.exp_m1() - xi) + self.k * z * z
    }

    /// `(xi, z)` itself if it lies in `K`, else the boundary point with the
    /// same `xi` and sign of `z`, if any.
    fn pull_inside(&self, xi: f64, z: f64) -> Option<(f64, f64)> {
        if self.in_set(xi, z) {
            return Some((xi, z));
        }
        let room = 0.5 - xi.exp_m1().powi(2);
        if room < 0.0 {
            return None;
        }
        let mut zb = room.sqrt().copysign(z);
        while !self.in_set(xi, zb) {
            zb *= 1.0 - f64::EPSILON;
        }
        Some((xi, zb))
    }

    /// `W / L3`, with the smallest directional limit at the origin.
    #[inline]
    fn ratio_w(&self, xi: f64, z: f64) -> f64 {
        let l3 = self.l3(xi, z);
        if l3 == 0.0 {
            return 2.0f64.min(1.0 / self.k);
        }
        (xi.exp_m1().powi(2) + z * z) / l3
    }

    /// `L3 / (e^L3 - 1)`, equal to 1 at the origin.
    #[inline]
    fn ratio_v(&self, xi: f64, z: f64) -> f64 {
        let l3 = self.l3(xi, z);
        if l3 == 0.0 {
            return 1.0;
        }
        l3 / l3.exp_m1()
    }
}

pub fn compact_set_constants(params: &ModelParams, ubar: f64) -> Result<CompactSetConstants> {
    let (d_o, _) = dilution_bounds(params);
    if !(ubar >= 0.0 && ubar < d_o) {
        return Err(ChemostatError::Domain(format!(
            "compact-set constants need 0 <= ubar < D_o, got ubar={ubar}, D_o={d_o}"
        )));
    }
    let (_, kappa, c1) = constants(params);
    let shape = Shape {
        k: kappa / (d_o - ubar),
    };
    let ratio_w_l3 = minimize_over_set(&shape, |s, xi, z| s.ratio_w(xi, z));
    let ratio_l3_v = minimize_over_set(&shape, |s, xi, z| s.ratio_v(xi, z));
    let c3 = 0.5 * c1 * ratio_w_l3;
    let c4 = c3 * ratio_l3_v;
    if !(c3 > 0.0 && c4 > 0.0) {
        return Err(ChemostatError::Domain(format!(
            "compact-set constants are not representable (C3={c3:e}, C4={c4:e})"
        )));
    }
    Ok(CompactSetConstants {
        c3,
        c4,
        ratio_w_l3,
        ratio_l3_v,
    })
}

fn grid_value(range: (f64, f64), i: usize) -> f64 {
    range.0 + (range.1 - range.0) * i as f64 / (GRID_POINTS - 1) as f64
}

fn minimize_over_set<F>(shape: &Shape, f: F) -> f64
where
    F: Fn(&Shape, f64, f64) -> f64 + Sync,
{
    let (best, xi0, z0) = (0..GRID_POINTS)
        .into_par_iter()
        .map(|i| {
            let xi = grid_value(XI_RANGE, i);
            let mut best = (f64::INFINITY, xi, 0.0);
            for j in 0..GRID_POINTS {
                let z = grid_value(Z_RANGE, j);
                if shape.in_set(xi, z) {
                    let v = f(shape, xi, z);
                    if v < best.0 {
                        best = (v, xi, z);
                    }
                }
            }
            best
        })
        .reduce(
            || (f64::INFINITY, 0.0, 0.0),
            |a, b| if b.0 < a.0 { b } else { a },
        );
    let step = (XI_RANGE.1 - XI_RANGE.0) / (GRID_POINTS - 1) as f64;
    compass_refine(shape, &f, (xi0, z0), best, step)
}

/// Pattern search over the eight compass directions, staying inside `K`.
/// Trial points outside `K` are moved onto its boundary along `z`, so the
/// search can slide along the boundary where the infima tend to sit.
fn compass_refine<F>(shape: &Shape, f: &F, start: (f64, f64), start_value: f64, step: f64) -> f64
where
    F: Fn(&Shape, f64, f64) -> f64,
{
    const DIRS: [(f64, f64); 8] = [
        (1.0, 0.0),
        (-1.0, 0.0),
        (0.0, 1.0),
        (0.0, -1.0),
        (1.0, 1.0),
        (1.0, -1.0),
        (-1.0, 1.0),
        (-1.0, -1.0),
    ];
    let (mut xi, mut z) = start;
    let mut best = start_value;
    let mut h = step;
    while h > 1e-13 {
        let mut improved = false;
        for (dx, dz) in DIRS {
            let Some((cx, cz)) = shape.pull_inside(xi + h * dx, z + h * dz) else {
                continue;
            };
            let v = f(shape, cx, cz);
            if v < best {
                best = v;
                xi = cx;
                z = cz;
                improved = true;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    best
}
