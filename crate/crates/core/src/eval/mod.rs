//! Image metrics and the lighting-representation comparison (spherical harmonics, spherical
//! Gaussians and texture-based lighting on virtual probe spheres).
//!
//! All metrics compare gamma-2.2 tonemapped images clamped to `[0, 1]`.

mod sg;
mod sh;
mod spheres;

pub use sg::{fit_sg, sg_fit, SgConfig, SgLighting, SgLobe};
pub use sh::{sh_basis, sh_index, sh_project, ShLighting};
pub use spheres::{
    render_sphere, sphere_harness, ConstantEnvironment, Environment, HarnessConfig, HarnessOutput, HarnessReport,
    Representation, SphereConfig, SphereMaterial, SphereScore, TblProbe,
};

use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::assets::{tonemap, TextureImage};
use crate::error::{Error, Result};
use crate::sampling::uniform_sphere;

/// PSNR reported for (numerically) identical images.
pub const PSNR_CAP: f64 = 99.0;
const MSE_FLOOR: f64 = 1e-10;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_shape(a: &TextureImage, b: &TextureImage) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )))
    }
}

fn display(img: &TextureImage) -> Vec<f64> {
    img.data().iter().map(|&v| tonemap(v)).collect()
}

pub fn mse(a: &TextureImage, b: &TextureImage) -> Result<f64> {
    check_shape(a, b)?;
    let (da, db) = (display(a), display(b));
    Ok(da.iter().zip(&db).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / da.len().max(1) as f64)
}

pub fn mae(a: &TextureImage, b: &TextureImage) -> Result<f64> {
    check_shape(a, b)?;
    let (da, db) = (display(a), display(b));
    Ok(da.iter().zip(&db).map(|(x, y)| (x - y).abs()).sum::<f64>() / da.len().max(1) as f64)
}

/// `10·log10(1/mse)`, capped at [`PSNR_CAP`] when `mse < 1e-10`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse < MSE_FLOOR {
        PSNR_CAP
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    }
}

pub fn psnr(a: &TextureImage, b: &TextureImage) -> Result<f64> {
    mse(a, b).map(psnr_from_mse)
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable "valid" filtering of a `w × h` plane: output is `(w−10) × (h−10)`.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM of two single-channel planes in `[0, 1]`.
pub fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize) -> Result<f64> {
    if a.len() != w * h || b.len() != w * h {
        return Err(Error::ShapeMismatch(format!("planes of {} and {} values for {w}x{h}", a.len(), b.len())));
    }
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidInput(format!(
            "image {w}x{h} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let k = gaussian_window();
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_a = filter_valid(a, w, h, &k);
    let mu_b = filter_valid(b, w, h, &k);
    let aa = filter_valid(&prod(a, a), w, h, &k);
    let bb = filter_valid(&prod(b, b), w, h, &k);
    let ab = filter_valid(&prod(a, b), w, h, &k);
    let (c1, c2) = ((SSIM_K1 * 1.0).powi(2), (SSIM_K2 * 1.0).powi(2));
    let mut sum = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        sum += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(sum / mu_a.len() as f64)
}

/// SSIM per channel of the tonemapped images, averaged over channels.
pub fn ssim(a: &TextureImage, b: &TextureImage) -> Result<f64> {
    check_shape(a, b)?;
    let (w, h, ch) = (a.width(), a.height(), a.channels());
    let (da, db) = (display(a), display(b));
    let mut total = 0.0;
    for c in 0..ch {
        let pa: Vec<f64> = da.iter().skip(c).step_by(ch).copied().collect();
        let pb: Vec<f64> = db.iter().skip(c).step_by(ch).copied().collect();
        total += ssim_plane(&pa, &pb, w, h)?;
    }
    Ok(total / ch as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub mse: f64,
    pub psnr: f64,
    pub mae: f64,
    pub ssim: f64,
}

pub fn compare(a: &TextureImage, b: &TextureImage) -> Result<ImageMetrics> {
    let m = mse(a, b)?;
    Ok(ImageMetrics {
        mse: m,
        psnr: psnr_from_mse(m),
        mae: mae(a, b)?,
        ssim: ssim(a, b)?,
    })
}

/// `n` stratified uniform directions on the sphere.
pub(crate) fn sphere_directions(n: usize, seed: u64) -> Vec<DVec3> {
    let mut rng = crate::sampling::stream_rng(seed, 0x5EED_5FE5);
    crate::sampling::net_2d(n, &mut rng).into_iter().map(uniform_sphere).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image(w: usize, h: usize, offset: f64) -> TextureImage {
        let data = (0..w * h)
            .flat_map(|i| {
                let v = ((i % w) as f64 / w as f64 * 0.6 + (i / w) as f64 / h as f64 * 0.3 + offset).powf(2.2);
                [v, v * 0.8, v * 0.5]
            })
            .collect();
        TextureImage::from_data(w, h, 3, data).unwrap()
    }

    #[test]
    fn identical_images() {
        let a = gradient_image(20, 16, 0.05);
        let m = compare(&a, &a).unwrap();
        assert_eq!(m.mse, 0.0);
        assert_eq!(m.psnr, PSNR_CAP);
        assert_eq!(m.mae, 0.0);
        assert!((m.ssim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_formula() {
        assert!((psnr_from_mse(0.01) - 20.0).abs() < 1e-12);
        assert_eq!(psnr_from_mse(1e-11), PSNR_CAP);
    }

    #[test]
    fn black_vs_white_mae_is_one() {
        let a = TextureImage::filled(4, 4, &[0.0; 3]);
        let b = TextureImage::filled(4, 4, &[1.0; 3]);
        assert_eq!(mae(&a, &b).unwrap(), 1.0);
        assert_eq!(mse(&a, &b).unwrap(), 1.0);
        assert_eq!(psnr(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn ssim_of_constant_planes_is_luminance_term() {
        let (w, h) = (16, 12);
        let (ma, mb) = (0.5, 0.6);
        let got = ssim_plane(&vec![ma; w * h], &vec![mb; w * h], w, h).unwrap();
        let c1 = 0.01f64.powi(2);
        let want = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn ssim_rejects_small_and_mismatched() {
        let a = TextureImage::filled(10, 30, &[0.5; 3]);
        assert!(matches!(ssim(&a, &a), Err(Error::InvalidInput(_))));
        let b = TextureImage::filled(12, 12, &[0.5; 3]);
        assert!(matches!(ssim(&b, &a), Err(Error::ShapeMismatch(_))));
        assert!(matches!(mse(&b, &a), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn ssim_is_symmetric_and_below_one() {
        let a = gradient_image(24, 20, 0.0);
        let b = gradient_image(24, 20, 0.1);
        let (ab, ba) = (ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        assert!((ab - ba).abs() < 1e-12);
        assert!(ab < 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn image() -> impl Strategy<Value = TextureImage> {
            prop::collection::vec(0.0f64..2.0, 12 * 12 * 3)
                .prop_map(|d| TextureImage::from_data(12, 12, 3, d).unwrap())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn metrics_identify_indiscernibles(a in image(), b in image()) {
                let self_m = compare(&a, &a).unwrap();
                prop_assert_eq!(self_m.mse, 0.0);
                prop_assert_eq!(self_m.mae, 0.0);
                prop_assert_eq!(self_m.psnr, PSNR_CAP);
                prop_assert!((self_m.ssim - 1.0).abs() < 1e-9);
                let differs = display(&a) != display(&b);
                let m = compare(&a, &b).unwrap();
                prop_assert_eq!(m.mse > 0.0, differs);
                prop_assert_eq!(m.mae > 0.0, differs);
                if differs {
                    prop_assert!(m.ssim < 1.0);
                }
            }
        }
    }
}
