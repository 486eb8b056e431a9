//! Precomputed diffuse lighting: a baked irradiance texture and a small irradiance MLP.

mod nirf;

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::path::Path;

use glam::{DVec2, DVec3};
use rayon::prelude::*;

use crate::assets::{read_mask_pgm, read_pfm, write_mask_pgm, write_pfm, MaskImage, TextureImage};
use crate::error::{Error, Result};
use crate::geometry::texel_surfels;
use crate::brdf::sample_cosine;
use crate::sampling::{net_2d, stream_rng, Frame};
use crate::tbl::TblLight;

pub use nirf::{nirf_training_set, Nirf, NirfConfig, NirfSamples, NirfTraining};

pub const DEFAULT_BAKE_SAMPLES: usize = 2048;

/// Anything that answers "how much light arrives at this surface point".
pub trait IrradianceSource: Sync {
    fn irradiance(&self, position: DVec3, uv: DVec2) -> DVec3;
}

/// Cosine-weighted Monte-Carlo estimate of `∫ L(x, ω) cosθ dω` over a stratified point set.
pub fn gather_irradiance(tbl: &TblLight, x: DVec3, n: DVec3, samples: usize, seed: u64, stream: u64) -> DVec3 {
    let mut rng = stream_rng(seed, stream);
    let frame = Frame::from_normal(n);
    let mut sum = DVec3::ZERO;
    for u in net_2d(samples, &mut rng) {
        let (local, _) = sample_cosine(u.x, u.y);
        sum += tbl.query_radiance(x, frame.to_world(local));
    }
    sum * (PI / samples as f64)
}

#[derive(Clone, Debug)]
pub struct IrradianceTexture {
    /// Baked values; uncovered texels hold the value of their nearest covered texel.
    pub texture: TextureImage,
    pub samples: usize,
    /// 1 where a surfel was baked, 0 where the value was copied.
    pub coverage: MaskImage,
}

/// Bakes irradiance for every covered texel of a `res × res` atlas. Each texel uses its own
/// random stream `(seed, texel index)`, so the result does not depend on scheduling.
pub fn bake_irt(tbl: &TblLight, res: usize, samples: usize, seed: u64) -> Result<IrradianceTexture> {
    if samples == 0 {
        return Err(Error::InvalidInput("bake sample count must be positive".into()));
    }
    let atlas = texel_surfels(&tbl.geometry().mesh, res, res)?;
    if atlas.surfels.is_empty() {
        return Err(Error::InvalidInput("mesh covers no texel of the atlas".into()));
    }
    let values: Vec<DVec3> = atlas
        .surfels
        .par_iter()
        .map(|s| {
            let index = (s.texel.1 * res + s.texel.0) as u64;
            gather_irradiance(tbl, s.position, s.normal, samples, seed, index)
        })
        .collect();
    let mut texture = TextureImage::new(res, res, 3);
    for (s, v) in atlas.surfels.iter().zip(values) {
        texture.set_rgb(s.texel.1 * res + s.texel.0, v);
    }
    let coverage = atlas.coverage_mask();
    fill_from_nearest(&mut texture, &coverage);
    Ok(IrradianceTexture {
        texture,
        samples,
        coverage,
    })
}

/// Copies into every uncovered texel the value of the closest covered one (breadth-first
/// over 8-neighbors, scanning neighbors in a fixed order).
fn fill_from_nearest(texture: &mut TextureImage, coverage: &MaskImage) {
    let (w, h) = (texture.width(), texture.height());
    let mut source = vec![usize::MAX; w * h];
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if coverage.at_texel(x, y) != 0 {
                source[y * w + x] = y * w + x;
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        let src = source[y * w + x];
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1)] {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if source[j] == usize::MAX {
                source[j] = src;
                queue.push_back((nx as usize, ny as usize));
            }
        }
    }
    for i in 0..w * h {
        if source[i] != i && source[i] != usize::MAX {
            let v = texture.rgb(source[i]);
            texture.set_rgb(i, v);
        }
    }
}

impl IrradianceTexture {
    /// Writes `<stem>.pfm` and `<stem>_coverage.pgm`.
    pub fn save(&self, stem: impl AsRef<Path>) -> Result<()> {
        let stem = stem.as_ref();
        write_pfm(&self.texture, stem.with_extension("pfm"))?;
        write_mask_pgm(&self.coverage, coverage_path(stem))
    }

    /// Reads a texture written by [`IrradianceTexture::save`]; a missing coverage file means
    /// every texel counts as baked.
    pub fn load(stem: impl AsRef<Path>, samples: usize) -> Result<Self> {
        let stem = stem.as_ref();
        let texture = read_pfm(stem.with_extension("pfm"))?;
        let cov_path = coverage_path(stem);
        let coverage = if cov_path.exists() {
            read_mask_pgm(cov_path)?
        } else {
            MaskImage::from_ids(texture.width(), texture.height(), vec![1; texture.pixel_count()])?
        };
        Self::from_texture(texture, coverage, samples)
    }

    /// Wraps a stored texture whose every texel is trusted.
    pub fn full(texture: TextureImage) -> Result<Self> {
        let coverage = MaskImage::from_ids(texture.width(), texture.height(), vec![1; texture.pixel_count()])?;
        Self::from_texture(texture, coverage, 0)
    }

    pub fn from_texture(mut texture: TextureImage, coverage: MaskImage, samples: usize) -> Result<Self> {
        if texture.channels() != 3 {
            return Err(Error::InvalidInput("irradiance texture must be RGB".into()));
        }
        if coverage.width() != texture.width() || coverage.height() != texture.height() {
            return Err(Error::ShapeMismatch("irradiance coverage differs from texture".into()));
        }
        if texture.data().iter().any(|v| *v < 0.0) {
            return Err(Error::Invariant("negative irradiance".into()));
        }
        if coverage.ids().iter().any(|&c| c != 0) {
            fill_from_nearest(&mut texture, &coverage);
        }
        Ok(IrradianceTexture {
            texture,
            samples,
            coverage,
        })
    }
}

fn coverage_path(stem: &Path) -> std::path::PathBuf {
    let mut name = stem.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push("_coverage.pgm");
    stem.with_file_name(name)
}

impl IrradianceSource for IrradianceTexture {
    fn irradiance(&self, _position: DVec3, uv: DVec2) -> DVec3 {
        self.texture.sample(uv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenes::emissive_box;

    fn bright_wall() -> [DVec3; 6] {
        let mut f = [DVec3::splat(0.1); 6];
        f[3] = DVec3::new(5.0, 4.0, 3.0);
        f
    }

    #[test]
    fn constant_environment_gives_pi_l() {
        let (scene, tex) = emissive_box(2.0, 16, [DVec3::splat(2.0); 6]).unwrap();
        let tbl = TblLight::new(&scene.geometry, &tex);
        let irt = bake_irt(&tbl, 16, DEFAULT_BAKE_SAMPLES, 7).unwrap();
        for s in texel_surfels(&scene.geometry.mesh, 16, 16).unwrap().surfels {
            let v = irt.texture.rgb(s.texel.1 * 16 + s.texel.0);
            assert!(((v - DVec3::splat(2.0 * PI)) / (2.0 * PI)).abs().max_element() < 0.01, "{v}");
        }
    }

    #[test]
    fn black_environment_bakes_zero() {
        let (scene, tex) = emissive_box(2.0, 8, [DVec3::ZERO; 6]).unwrap();
        let tbl = TblLight::new(&scene.geometry, &tex);
        let irt = bake_irt(&tbl, 8, 64, 1).unwrap();
        assert!(irt.texture.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bright_wall_matches_dense_gather() {
        let mut faces = [DVec3::ZERO; 6];
        faces[3] = DVec3::splat(5.0);
        let (scene, tex) = emissive_box(2.0, 32, faces).unwrap();
        let tbl = TblLight::new(&scene.geometry, &tex);
        let res = 12;
        let irt = bake_irt(&tbl, res, DEFAULT_BAKE_SAMPLES, 3).unwrap();
        let atlas = texel_surfels(&scene.geometry.mesh, res, res).unwrap();
        let (mut err2, mut ref2, mut worst) = (0.0, 0.0, 0.0f64);
        for s in &atlas.surfels {
            let oracle = gather_irradiance(&tbl, s.position, s.normal, 100_000, 99, 0).x;
            let v = irt.texture.rgb(s.texel.1 * res + s.texel.0).x;
            err2 += (v - oracle).powi(2);
            ref2 += oracle * oracle;
            if oracle > 0.0 {
                worst = worst.max((v - oracle).abs() / oracle);
            }
        }
        let rel = (err2 / ref2).sqrt();
        assert!(rel < 0.02, "relative L2 error {rel}");
        // single texels near the wall's silhouette carry ~1% standard error each
        assert!(worst < 0.06, "worst texel {worst}");
    }

    #[test]
    fn bake_is_linear_in_emission() {
        let (scene, tex) = emissive_box(2.0, 16, bright_wall()).unwrap();
        let doubled = tex.scaled(2.0);
        let a = bake_irt(&TblLight::new(&scene.geometry, &tex), 8, 64, 5).unwrap();
        let b = bake_irt(&TblLight::new(&scene.geometry, &doubled), 8, 64, 5).unwrap();
        for (x, y) in a.texture.data().iter().zip(b.texture.data()) {
            assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn bake_is_reproducible_across_thread_counts() {
        let (scene, tex) = emissive_box(2.0, 16, bright_wall()).unwrap();
        let tbl = TblLight::new(&scene.geometry, &tex);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| bake_irt(&tbl, 8, 32, 11).unwrap());
        let b = three.install(|| bake_irt(&tbl, 8, 32, 11).unwrap());
        assert_eq!(a.texture, b.texture);
    }

    #[test]
    fn estimator_is_unbiased() {
        let (scene, tex) = emissive_box(2.0, 32, bright_wall()).unwrap();
        let tbl = TblLight::new(&scene.geometry, &tex);
        let atlas = texel_surfels(&scene.geometry.mesh, 8, 8).unwrap();
        let s = atlas.surfels[atlas.surfels.len() / 3];
        let runs: Vec<f64> = (0..50)
            .map(|seed| gather_irradiance(&tbl, s.position, s.normal, 256, seed, 0).x)
            .collect();
        let mean = runs.iter().sum::<f64>() / 50.0;
        let var = runs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 49.0;
        let sem = (var / 50.0).sqrt();
        let oracle = gather_irradiance(&tbl, s.position, s.normal, 200_000, 1234, 0).x;
        assert!((mean - oracle).abs() <= 3.0 * sem.max(1e-3 * oracle), "{mean} vs {oracle}, sem {sem}");
    }

    #[test]
    fn query_is_bilinear_and_fills_uncovered() {
        let mut texture = TextureImage::new(2, 1, 3);
        texture.set_rgb(0, DVec3::new(1.0, 2.0, 3.0));
        texture.set_rgb(1, DVec3::new(3.0, 4.0, 5.0));
        let coverage = MaskImage::from_ids(2, 1, vec![1, 1]).unwrap();
        let irt = IrradianceTexture::from_texture(texture, coverage, 1).unwrap();
        assert_eq!(irt.irradiance(DVec3::ZERO, DVec2::new(0.25, 0.5)), DVec3::new(1.0, 2.0, 3.0));
        assert_eq!(irt.irradiance(DVec3::ZERO, DVec2::new(0.5, 0.5)), DVec3::new(2.0, 3.0, 4.0));

        let mut texture = TextureImage::new(3, 1, 3);
        texture.set_rgb(2, DVec3::splat(7.0));
        let coverage = MaskImage::from_ids(3, 1, vec![0, 0, 1]).unwrap();
        let irt = IrradianceTexture::from_texture(texture, coverage, 1).unwrap();
        assert_eq!(irt.irradiance(DVec3::ZERO, DVec2::new(1.0 / 6.0, 0.5)), DVec3::splat(7.0));
    }

    #[test]
    fn save_load_roundtrip() {
        let (scene, tex) = emissive_box(2.0, 16, bright_wall()).unwrap();
        let irt = bake_irt(&TblLight::new(&scene.geometry, &tex), 8, 16, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        irt.save(dir.path().join("irt")).unwrap();
        assert!(dir.path().join("irt_coverage.pgm").exists());
        let back = IrradianceTexture::load(dir.path().join("irt"), 16).unwrap();
        assert_eq!(back.coverage, irt.coverage);
        for (a, b) in back.texture.data().iter().zip(irt.texture.data()) {
            assert_eq!(*a, *b as f32 as f64);
        }
    }
}
