//! Real spherical harmonics with the polar axis along +z (Condon–Shortley phase included).

use std::f64::consts::PI;

use glam::DVec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sphere_directions;
use crate::tbl::TblLight;

/// Flat index of `(l, m)`, `−l ≤ m ≤ l`.
pub fn sh_index(l: usize, m: i64) -> usize {
    ((l * (l + 1)) as i64 + m) as usize
}

/// All `(order + 1)²` basis values at the unit direction `d`.
pub fn sh_basis(order: usize, d: DVec3) -> Vec<f64> {
    let n = order + 1;
    let x = d.z.clamp(-1.0, 1.0);
    let s = (1.0 - x * x).max(0.0).sqrt();
    let phi = d.y.atan2(d.x);

    // Associated Legendre P_l^m(x), m ≥ 0, by the standard upward recurrences.
    let mut p = vec![vec![0.0; n]; n];
    let mut pmm = 1.0;
    for m in 0..n {
        if m > 0 {
            pmm *= -((2 * m - 1) as f64) * s;
        }
        p[m][m] = pmm;
        if m + 1 < n {
            p[m + 1][m] = x * (2 * m + 1) as f64 * pmm;
        }
        for l in m + 2..n {
            p[l][m] = ((2 * l - 1) as f64 * x * p[l - 1][m] - (l + m - 1) as f64 * p[l - 2][m]) / (l - m) as f64;
        }
    }

    let mut out = vec![0.0; n * n];
    for l in 0..n {
        for m in 0..=l {
            // K = sqrt((2l+1)/4π · (l−m)!/(l+m)!)
            let ratio: f64 = ((l - m + 1)..=(l + m)).map(|k| 1.0 / k as f64).product();
            let k = ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt();
            if m == 0 {
                out[sh_index(l, 0)] = k * p[l][0];
            } else {
                let mf = m as f64;
                out[sh_index(l, m as i64)] = std::f64::consts::SQRT_2 * k * (mf * phi).cos() * p[l][m];
                out[sh_index(l, -(m as i64))] = std::f64::consts::SQRT_2 * k * (mf * phi).sin() * p[l][m];
            }
        }
    }
    out
}

/// RGB spherical-harmonic lighting; `coeffs[sh_index(l, m)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShLighting {
    pub order: usize,
    pub coeffs: Vec<DVec3>,
}

impl ShLighting {
    pub fn zero(order: usize) -> Self {
        ShLighting {
            order,
            coeffs: vec![DVec3::ZERO; (order + 1) * (order + 1)],
        }
    }

    /// `c_lm = Σ_k w_k L_k Y_lm(ω_k)` over weighted radiance samples (quadrature or MC).
    pub fn from_weighted_samples(order: usize, samples: impl IntoIterator<Item = (DVec3, f64, DVec3)>) -> Self {
        let mut sh = Self::zero(order);
        for (d, w, l) in samples {
            for (c, y) in sh.coeffs.iter_mut().zip(sh_basis(order, d)) {
                *c += l * (w * y);
            }
        }
        sh
    }

    /// The same lighting cut to a lower order.
    pub fn truncated(&self, order: usize) -> Self {
        let order = order.min(self.order);
        ShLighting {
            order,
            coeffs: self.coeffs[..(order + 1) * (order + 1)].to_vec(),
        }
    }

    /// Reconstructed radiance; may be negative (ringing is not clamped).
    pub fn eval(&self, d: DVec3) -> DVec3 {
        self.coeffs.iter().zip(sh_basis(self.order, d)).map(|(c, y)| *c * y).sum()
    }
}

/// Monte-Carlo projection of the TBL radiance seen from `x` over the full sphere.
pub fn sh_project(tbl: &TblLight, x: DVec3, order: usize, samples: usize, seed: u64) -> ShLighting {
    let dirs = sphere_directions(samples.max(1), seed);
    let radiance: Vec<DVec3> = dirs.par_iter().map(|&d| tbl.query_radiance(x, d)).collect();
    let w = 4.0 * PI / dirs.len() as f64;
    ShLighting::from_weighted_samples(order, dirs.into_iter().zip(radiance).map(|(d, l)| (d, w, l)))
}
