//! Simplified Disney BRDF: Lambertian diffuse plus a GGX specular lobe with Schlick
//! Fresnel (spherical-Gaussian exponent form, F0 = 0.04) and the Smith-Schlick geometry
//! factor with `k = (R + 1)² / 8`. Roughness maps to GGX width as `α = R²`.

use std::f64::consts::PI;

use glam::DVec3;

/// Lower roughness bound used throughout (matches the near-mirror highlight search).
pub const R_MIN: f64 = 0.01;

/// Normal-incidence reflectance of the specular lobe.
pub const F0: f64 = 0.04;

pub fn clamp_roughness(r: f64) -> f64 {
    r.clamp(R_MIN, 1.0)
}

pub fn eval_diffuse(albedo: DVec3) -> DVec3 {
    albedo / PI
}

/// GGX normal distribution with `α = R²`.
pub fn ndf(n_dot_h: f64, roughness: f64) -> f64 {
    let a2 = roughness.powi(4);
    let d = n_dot_h * n_dot_h * (a2 - 1.0) + 1.0;
    a2 / (PI * d * d)
}

/// Schlick Fresnel with the exponent approximation `2^((-5.55473 c - 6.98316) c)`.
pub fn fresnel(v_dot_h: f64) -> f64 {
    F0 + (1.0 - F0) * 2f64.powf((-5.55473 * v_dot_h - 6.98316) * v_dot_h)
}

pub fn schlick_k(roughness: f64) -> f64 {
    (roughness + 1.0).powi(2) / 8.0
}

/// One-sided Smith-Schlick term.
pub fn g1(n_dot_x: f64, k: f64) -> f64 {
    n_dot_x / (n_dot_x * (1.0 - k) + k)
}

pub fn geometry_factor(n_dot_v: f64, n_dot_l: f64, roughness: f64) -> f64 {
    let k = schlick_k(roughness);
    g1(n_dot_l, k) * g1(n_dot_v, k)
}

/// `D F G / (4 (n·v)(n·l))`, zero when either direction is at or below the horizon.
pub fn eval_specular(n: DVec3, v: DVec3, l: DVec3, roughness: f64) -> f64 {
    let n_dot_v = n.dot(v);
    let n_dot_l = n.dot(l);
    if n_dot_v <= 0.0 || n_dot_l <= 0.0 {
        return 0.0;
    }
    let h = (v + l).normalize();
    let d = ndf(n.dot(h).max(0.0), roughness);
    let f = fresnel(v.dot(h).max(0.0));
    let g = geometry_factor(n_dot_v, n_dot_l, roughness);
    d * f * g / (4.0 * n_dot_v * n_dot_l)
}

/// Exact `∂f_s/∂R` through `α = R²` (in D) and `k = (R+1)²/8` (in G); F does not depend on R.
pub fn d_specular_d_roughness(n: DVec3, v: DVec3, l: DVec3, roughness: f64) -> f64 {
    let n_dot_v = n.dot(v);
    let n_dot_l = n.dot(l);
    if n_dot_v <= 0.0 || n_dot_l <= 0.0 {
        return 0.0;
    }
    let h = (v + l).normalize();
    let c = n.dot(h).max(0.0);
    let f = fresnel(v.dot(h).max(0.0));

    let a2 = roughness.powi(4);
    let denom = c * c * (a2 - 1.0) + 1.0;
    let d = a2 / (PI * denom * denom);
    // dD/d(α²) = (denom - 2 α² c²) / (π denom³), d(α²)/dR = 4 R³
    let dd_dr = (denom - 2.0 * a2 * c * c) / (PI * denom.powi(3)) * 4.0 * roughness.powi(3);

    let k = schlick_k(roughness);
    let dk_dr = (roughness + 1.0) / 4.0;
    let gl = g1(n_dot_l, k);
    let gv = g1(n_dot_v, k);
    let dg1 = |x: f64| -x * (1.0 - x) / (x * (1.0 - k) + k).powi(2);
    let dg_dr = (dg1(n_dot_l) * gv + gl * dg1(n_dot_v)) * dk_dr;

    f / (4.0 * n_dot_v * n_dot_l) * (dd_dr * gl * gv + d * dg_dr)
}

/// Cosine-weighted hemisphere direction in the local frame (z = normal) and its pdf.
pub fn sample_cosine(u1: f64, u2: f64) -> (DVec3, f64) {
    let cos_theta = (1.0 - u1).max(0.0).sqrt();
    let sin_theta = u1.max(0.0).sqrt();
    let phi = 2.0 * PI * u2;
    (
        DVec3::new(sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta),
        cos_theta / PI,
    )
}

/// GGX-distributed half vector in the local frame with density `D(h) cosθ_h`.
pub fn sample_ggx(u1: f64, u2: f64, roughness: f64) -> (DVec3, f64) {
    let a2 = roughness.powi(4);
    let cos_theta = ((1.0 - u1) / (1.0 + (a2 - 1.0) * u1)).max(0.0).sqrt();
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    let phi = 2.0 * PI * u2;
    let h = DVec3::new(sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta);
    (h, ndf(cos_theta, roughness) * cos_theta)
}

pub fn reflect(v: DVec3, h: DVec3) -> DVec3 {
    2.0 * v.dot(h) * h - v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{stream_rng, uniform_sphere};
    use glam::DVec2;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn diffuse_values() {
        let inv_pi = 1.0 / PI;
        assert_eq!(eval_diffuse(DVec3::ONE), DVec3::splat(inv_pi));
        assert_eq!(eval_diffuse(DVec3::ZERO), DVec3::ZERO);
        let d = eval_diffuse(DVec3::new(0.6, 0.3, 0.0));
        assert!((d.x - 0.19099).abs() < 1e-4 && (d.y - 0.095493).abs() < 1e-5 && d.z == 0.0);
    }

    #[test]
    fn ndf_peak() {
        // α = 0.25, D(1) = 1/(π α²)
        assert!((ndf(1.0, 0.5) - 5.092958).abs() < 1e-5);
    }

    #[test]
    fn fresnel_limits() {
        assert!((fresnel(1.0) - 0.040161).abs() < 1e-6);
        assert_eq!(fresnel(0.0), 1.0);
    }

    #[test]
    fn geometry_values() {
        assert_eq!(schlick_k(1.0), 0.5);
        assert_eq!(g1(1.0, 0.5), 1.0);
        assert!((g1(0.5, schlick_k(0.0)) - 0.888_888_9).abs() < 1e-6);
    }

    #[test]
    fn below_horizon_is_zero() {
        let n = DVec3::Z;
        let v = DVec3::new(0.0, 0.6, 0.8);
        let l = DVec3::new(0.0, 0.6, -0.8);
        assert_eq!(eval_specular(n, v, l, 0.5), 0.0);
        assert_eq!(eval_specular(n, l, v, 0.5), 0.0);
        assert_eq!(d_specular_d_roughness(n, v, l, 0.5), 0.0);
    }

    fn random_config(rng: &mut impl Rng) -> (DVec3, DVec3, DVec3, f64) {
        let n = DVec3::Z;
        let pick = |rng: &mut dyn rand::RngCore| loop {
            let d = uniform_sphere(DVec2::new(rng.gen(), rng.gen()));
            if d.z > 0.05 {
                return d;
            }
        };
        let v = pick(rng);
        let l = pick(rng);
        (n, v, l, rng.gen_range(0.05..0.95))
    }

    #[test]
    fn roughness_derivative_matches_central_difference() {
        let mut rng = stream_rng(11, 0);
        let h = 1e-4;
        for _ in 0..100 {
            let (n, v, l, r) = random_config(&mut rng);
            let fd = (eval_specular(n, v, l, r + h) - eval_specular(n, v, l, r - h)) / (2.0 * h);
            let an = d_specular_d_roughness(n, v, l, r);
            let scale = an.abs().max(fd.abs()).max(1e-6);
            assert!((an - fd).abs() / scale < 1e-4, "r={r} an={an} fd={fd}");
        }
    }

    #[test]
    fn derivative_changes_sign_at_interior_maximum() {
        // grazing off-specular configuration has an interior maximum over R
        let n = DVec3::Z;
        let v = DVec3::new(0.6, 0.0, 0.8);
        let l = DVec3::new(0.0, 0.6, 0.8);
        let rs: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        let best = rs
            .iter()
            .copied()
            .max_by(|a, b| eval_specular(n, v, l, *a).total_cmp(&eval_specular(n, v, l, *b)))
            .unwrap();
        assert!(best > 0.05 && best < 0.95);
        assert!(d_specular_d_roughness(n, v, l, best - 0.02) > 0.0);
        assert!(d_specular_d_roughness(n, v, l, best + 0.02) < 0.0);
    }

    #[test]
    fn cosine_sampling() {
        let (d, pdf) = sample_cosine(0.0, 0.3);
        assert!((d - DVec3::Z).length() < 1e-12);
        assert!((pdf - 1.0 / PI).abs() < 1e-12);

        let mut rng = stream_rng(3, 0);
        let n = 100_000;
        let mut mean_z = 0.0;
        let mut inv_pdf = 0.0;
        for _ in 0..n {
            let (d, pdf) = sample_cosine(rng.gen(), rng.gen());
            assert!((d.length() - 1.0).abs() < 1e-12);
            mean_z += d.z;
            inv_pdf += 1.0 / pdf;
        }
        assert!((mean_z / n as f64 - 2.0 / 3.0).abs() < 0.01);

        // ∫ pdf dω = 1, estimated with uniform hemisphere samples (pdf 1/2π)
        let mut integral = 0.0;
        for _ in 0..n {
            let mut d = uniform_sphere(DVec2::new(rng.gen(), rng.gen()));
            d.z = d.z.abs();
            integral += d.z / PI * 2.0 * PI;
        }
        assert!((integral / n as f64 - 1.0).abs() < 0.01);
        assert!(inv_pdf.is_finite());
    }

    #[test]
    fn ggx_peak_and_concentration() {
        let (h, _) = sample_ggx(0.0, 0.7, 0.4);
        assert!((h - DVec3::Z).length() < 1e-12);

        let mut rng = stream_rng(5, 0);
        let n = 100_000;
        let close = (0..n)
            .filter(|_| sample_ggx(rng.gen(), rng.gen(), R_MIN).0.z > 0.999)
            .count();
        assert!(close as f64 / n as f64 >= 0.99);
    }

    #[test]
    fn ggx_histogram_matches_density_at_alpha_one() {
        // chi-square against p(θ) = D(θ) cosθ sinθ · 2π integrated per bin
        let bins = 20;
        let n = 1_000_000;
        let mut counts = vec![0usize; bins];
        let mut rng = stream_rng(9, 0);
        let half_pi = PI / 2.0;
        for _ in 0..n {
            let (h, _) = sample_ggx(rng.gen(), rng.gen(), 1.0);
            let theta = h.z.clamp(-1.0, 1.0).acos();
            counts[((theta / half_pi) * bins as f64).min(bins as f64 - 1.0) as usize] += 1;
        }
        let mut chi2 = 0.0;
        for (b, &count) in counts.iter().enumerate() {
            let (t0, t1) = (b as f64 * half_pi / bins as f64, (b + 1) as f64 * half_pi / bins as f64);
            let steps = 200;
            let mut p = 0.0;
            for s in 0..steps {
                let t = t0 + (s as f64 + 0.5) * (t1 - t0) / steps as f64;
                p += ndf(t.cos(), 1.0) * t.cos() * t.sin() * 2.0 * PI * (t1 - t0) / steps as f64;
            }
            let expected = p * n as f64;
            chi2 += (count as f64 - expected).powi(2) / expected;
        }
        // 19 degrees of freedom, 99.9th percentile ≈ 43.8
        assert!(chi2 < 43.8, "chi2 = {chi2}");
    }

    #[test]
    fn diffuse_white_furnace_is_exact() {
        // ∫ (1/π) cosθ dω = 1 by the cosine-weighted estimator with no variance
        let mut rng = stream_rng(1, 1);
        for _ in 0..100 {
            let (d, pdf) = sample_cosine(rng.gen(), rng.gen());
            let est = eval_diffuse(DVec3::ONE).x * d.z / pdf;
            assert!((est - 1.0).abs() < 1e-9 || d.z == 0.0);
        }
    }

    proptest! {
        #[test]
        fn specular_is_non_negative(
            vx in -1.0f64..1.0, vy in -1.0f64..1.0, vz in 0.01f64..1.0,
            lx in -1.0f64..1.0, ly in -1.0f64..1.0, lz in -0.5f64..1.0,
            r in R_MIN..1.0,
        ) {
            let v = DVec3::new(vx, vy, vz).normalize();
            let l = DVec3::new(lx, ly, lz).normalize();
            prop_assert!(eval_specular(DVec3::Z, v, l, r) >= 0.0);
        }

        #[test]
        fn derivative_matches_finite_difference(seed in any::<u64>()) {
            let mut rng = stream_rng(seed, 0);
            let (n, v, l, r) = random_config(&mut rng);
            let h = 1e-4;
            let fd = (eval_specular(n, v, l, r + h) - eval_specular(n, v, l, r - h)) / (2.0 * h);
            let an = d_specular_d_roughness(n, v, l, r);
            // near a stationary point the relative error is measured against the value scale
            let scale = an.abs().max(fd.abs()).max(eval_specular(n, v, l, r)).max(1e-6);
            prop_assert!((an - fd).abs() <= 1e-4 * scale, "R {r}: analytic {an} vs fd {fd}");
        }
    }
}
