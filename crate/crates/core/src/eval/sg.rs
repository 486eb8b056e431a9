//! Spherical-Gaussian lighting fitted to sampled radiance.

use std::f64::consts::PI;

use glam::DVec3;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sphere_directions;
use crate::error::{Error, Result};
use crate::optimizer::{Adam, AdamConfig};
use crate::tbl::TblLight;

/// `a · exp(λ (ω·μ − 1))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgLobe {
    pub axis: DVec3,
    pub sharpness: f64,
    pub amplitude: DVec3,
}

impl SgLobe {
    pub fn eval(&self, d: DVec3) -> DVec3 {
        self.amplitude * (self.sharpness * (d.dot(self.axis) - 1.0)).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgLighting {
    pub lobes: Vec<SgLobe>,
}

impl SgLighting {
    /// Non-negative by construction: amplitudes are kept ≥ 0.
    pub fn eval(&self, d: DVec3) -> DVec3 {
        self.lobes.iter().map(|l| l.eval(d)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgConfig {
    pub lobes: usize,
    pub samples: usize,
    pub steps: usize,
    pub lr: f64,
    /// Second-moment decay. The LS initialization leaves large early gradients, and with
    /// 0.999 their memory throttles the later steps of a 500-step fit.
    pub beta2: f64,
    pub init_sharpness: f64,
    pub seed: u64,
}

impl Default for SgConfig {
    fn default() -> Self {
        SgConfig {
            lobes: 12,
            samples: 4096,
            steps: 500,
            lr: 1e-2,
            beta2: 0.99,
            init_sharpness: 8.0,
            seed: 0,
        }
    }
}

const LOG_SHARPNESS_RANGE: (f64, f64) = (-4.6, 9.2);
const CHUNK: usize = 256;

/// Unit vectors spread evenly over the sphere.
pub(crate) fn fibonacci_sphere(n: usize) -> Vec<DVec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            DVec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Least-squares amplitudes for fixed axes and sharpness, clamped to be non-negative.
fn ls_amplitudes(dirs: &[DVec3], radiance: &[DVec3], axes: &[DVec3], sharpness: f64) -> Vec<DVec3> {
    let g = DMatrix::from_fn(dirs.len(), axes.len(), |k, j| (sharpness * (dirs[k].dot(axes[j]) - 1.0)).exp());
    let svd = g.svd(true, true);
    let mut amps = vec![DVec3::ZERO; axes.len()];
    for c in 0..3 {
        let b = DVector::from_iterator(dirs.len(), radiance.iter().map(|l| l[c]));
        let Ok(x) = svd.solve(&b, 1e-12) else {
            continue;
        };
        for (j, a) in amps.iter_mut().enumerate() {
            a[c] = x[j].max(0.0);
        }
    }
    amps
}

// Parameter layout per lobe: axis (3), ln λ (1), amplitude (3).
const P: usize = 7;

fn unpack(params: &[f64]) -> Vec<SgLobe> {
    params
        .chunks(P)
        .map(|p| SgLobe {
            axis: DVec3::new(p[0], p[1], p[2]),
            sharpness: p[3].exp(),
            amplitude: DVec3::new(p[4], p[5], p[6]),
        })
        .collect()
}

/// Mean squared log1p error over samples × channels and its gradient with respect to the
/// packed parameters (axis gradient tangent to the sphere).
fn loss_and_grad(params: &[f64], dirs: &[DVec3], radiance: &[DVec3]) -> (f64, Vec<f64>) {
    let lobes = unpack(params);
    let norm = 1.0 / (3 * dirs.len()) as f64;
    let partials: Vec<(f64, Vec<f64>)> = dirs
        .par_chunks(CHUNK)
        .zip(radiance.par_chunks(CHUNK))
        .map(|(ds, ls)| {
            let mut grad = vec![0.0; params.len()];
            let mut loss = 0.0;
            let mut g = vec![0.0; lobes.len()];
            for (d, l) in ds.iter().zip(ls) {
                let mut s = DVec3::ZERO;
                for (j, lobe) in lobes.iter().enumerate() {
                    g[j] = (lobe.sharpness * (d.dot(lobe.axis) - 1.0)).exp();
                    s += lobe.amplitude * g[j];
                }
                let mut ds_ = DVec3::ZERO;
                for c in 0..3 {
                    let r = s[c].max(0.0).ln_1p() - l[c].max(0.0).ln_1p();
                    loss += r * r * norm;
                    ds_[c] = 2.0 * r * norm / (1.0 + s[c].max(0.0));
                }
                for (j, lobe) in lobes.iter().enumerate() {
                    let p = &mut grad[j * P..(j + 1) * P];
                    let a_dot = lobe.amplitude.dot(ds_) * g[j];
                    let dmu = *d * (a_dot * lobe.sharpness);
                    p[0] += dmu.x;
                    p[1] += dmu.y;
                    p[2] += dmu.z;
                    p[3] += a_dot * (d.dot(lobe.axis) - 1.0) * lobe.sharpness;
                    p[4] += ds_.x * g[j];
                    p[5] += ds_.y * g[j];
                    p[6] += ds_.z * g[j];
                }
            }
            (loss, grad)
        })
        .collect();
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (l, g) in partials {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    for (j, lobe) in lobes.iter().enumerate() {
        let p = &mut grad[j * P..j * P + 3];
        let dmu = DVec3::new(p[0], p[1], p[2]);
        let t = dmu - lobe.axis * dmu.dot(lobe.axis);
        p.copy_from_slice(&t.to_array());
    }
    (loss, grad)
}

/// Fits `config.lobes` lobes to radiance samples `(dirs[k], radiance[k])`.
pub fn fit_sg(dirs: &[DVec3], radiance: &[DVec3], config: &SgConfig) -> Result<SgLighting> {
    if dirs.is_empty() || dirs.len() != radiance.len() || config.lobes == 0 {
        return Err(Error::InvalidInput(format!(
            "SG fit needs matching non-empty samples and lobes (got {} dirs, {} values, {} lobes)",
            dirs.len(),
            radiance.len(),
            config.lobes
        )));
    }
    let axes = fibonacci_sphere(config.lobes);
    let amps = ls_amplitudes(dirs, radiance, &axes, config.init_sharpness);
    let mut params: Vec<f64> = axes
        .iter()
        .zip(&amps)
        .flat_map(|(m, a)| [m.x, m.y, m.z, config.init_sharpness.ln(), a.x, a.y, a.z])
        .collect();
    let adam_config = AdamConfig {
        beta2: config.beta2,
        ..AdamConfig::with_lr(config.lr)
    };
    let mut adam = Adam::new(adam_config, params.len());
    for step in 0..config.steps {
        let (loss, grad) = loss_and_grad(&params, dirs, radiance);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                what: "spherical Gaussian fit",
                epoch: step,
            });
        }
        adam.step(&mut params, &grad);
        for p in params.chunks_mut(P) {
            let axis = DVec3::new(p[0], p[1], p[2]).normalize_or(DVec3::Z);
            p[..3].copy_from_slice(&axis.to_array());
            p[3] = p[3].clamp(LOG_SHARPNESS_RANGE.0, LOG_SHARPNESS_RANGE.1);
            for a in &mut p[4..] {
                *a = a.max(0.0);
            }
        }
    }
    Ok(SgLighting { lobes: unpack(&params) })
}

/// Fits SG lighting to the TBL radiance seen from `x`, sampled uniformly over the sphere.
pub fn sg_fit(tbl: &TblLight, x: DVec3, config: &SgConfig) -> Result<SgLighting> {
    let dirs = sphere_directions(config.samples.max(1), config.seed);
    let radiance: Vec<DVec3> = dirs.par_iter().map(|&d| tbl.query_radiance(x, d)).collect();
    fit_sg(&dirs, &radiance, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lobe_peaks_at_its_axis() {
        let lobe = SgLobe {
            axis: DVec3::Y,
            sharpness: 20.0,
            amplitude: DVec3::new(1.0, 2.0, 3.0),
        };
        assert_eq!(lobe.eval(DVec3::Y), lobe.amplitude);
        assert!(lobe.eval(DVec3::X).max_element() < 1e-8);
    }

    #[test]
    fn fibonacci_axes_are_unit_and_spread() {
        let axes = fibonacci_sphere(12);
        assert!(axes.iter().all(|a| (a.length() - 1.0).abs() < 1e-12));
        let mean: DVec3 = axes.iter().copied().sum::<DVec3>() / 12.0;
        assert!(mean.length() < 0.05);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let dirs = sphere_directions(64, 1);
        let radiance: Vec<DVec3> = dirs.iter().map(|d| DVec3::new(1.0 + d.x, 0.5, 2.0 * d.z.max(0.0))).collect();
        let axes = fibonacci_sphere(3);
        let params: Vec<f64> = axes
            .iter()
            .enumerate()
            .flat_map(|(i, m)| [m.x, m.y, m.z, 1.5 + 0.2 * i as f64, 0.3, 0.6 + 0.1 * i as f64, 0.2])
            .collect();
        let (_, grad) = loss_and_grad(&params, &dirs, &radiance);
        let h = 1e-6;
        for k in 0..params.len() {
            if k % P < 3 {
                continue; // axis entries carry the tangent-projected gradient
            }
            let mut p = params.clone();
            p[k] += h;
            let up = loss_and_grad(&p, &dirs, &radiance).0;
            p[k] -= 2.0 * h;
            let down = loss_and_grad(&p, &dirs, &radiance).0;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-6 * fd.abs().max(1e-3), "param {k}: {fd} vs {}", grad[k]);
        }
        // Tangential axis derivative: rotate the axis about a perpendicular direction.
        let mu = DVec3::new(params[0], params[1], params[2]);
        let t = mu.any_orthonormal_vector();
        let rotated = |eps: f64| {
            let mut p = params.clone();
            let m = (mu * eps.cos() + t * eps.sin()).to_array();
            p[..3].copy_from_slice(&m);
            loss_and_grad(&p, &dirs, &radiance).0
        };
        let fd = (rotated(h) - rotated(-h)) / (2.0 * h);
        let an = DVec3::new(grad[0], grad[1], grad[2]).dot(t);
        assert!((fd - an).abs() < 1e-6 * fd.abs().max(1e-3), "{fd} vs {an}");
    }

    #[test]
    fn fit_to_constant_is_flat() {
        let l0 = DVec3::new(0.7, 1.0, 1.3);
        let dirs = sphere_directions(2048, 2);
        let radiance = vec![l0; dirs.len()];
        let sg = fit_sg(&dirs, &radiance, &SgConfig::default()).unwrap();
        for (d, _) in crate::eval::sh::tests::quadrature(24) {
            let rel = (sg.eval(d) - l0).abs() / l0;
            assert!(rel.max_element() < 0.02, "{d}: {}", sg.eval(d));
        }
    }

    #[test]
    fn fit_is_non_negative_and_rejects_empty() {
        let dirs = sphere_directions(512, 4);
        let radiance: Vec<DVec3> = dirs.iter().map(|d| DVec3::splat(if d.y > 0.9 { 20.0 } else { 0.0 })).collect();
        let sg = fit_sg(&dirs, &radiance, &SgConfig { steps: 50, ..SgConfig::default() }).unwrap();
        assert!(sg.lobes.iter().all(|l| l.amplitude.min_element() >= 0.0 && l.sharpness > 0.0));
        assert!(fit_sg(&[], &[], &SgConfig::default()).is_err());
    }
}
