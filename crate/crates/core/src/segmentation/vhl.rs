//! Virtual-highlight detection: pixels where a near-mirror render of the baked lighting is
//! brighter than the diffuse shading of their class.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quantile_of;
use crate::assets::{MaskImage, TextureImage};
use crate::geometry::{Camera, SceneGeometry};
use crate::irradiance::IrradianceSource;
use crate::renderer::{emitter_mask, make_gbuffer, shade_diffuse, shade_specular, RenderConfig, Sampler};
use crate::sampling::{luminance, mix_seed};
use crate::tbl::TblLight;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VhlConfig {
    pub roughness: f64,
    pub samples: usize,
    pub tau_abs: f64,
    pub tau_rel: f64,
    pub seed: u64,
    pub emitter_threshold: f64,
}

impl Default for VhlConfig {
    fn default() -> Self {
        VhlConfig {
            roughness: 0.01,
            samples: 64,
            tau_abs: 0.05,
            tau_rel: 1.0,
            seed: 0,
            emitter_threshold: 0.5,
        }
    }
}

/// Highlight pixels of one view. A class's mask is `highlight ∧ classes == c`, so it is a
/// subset of the class mask by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct VhlView {
    pub width: usize,
    pub height: usize,
    /// Class id per pixel; 0 for misses and emitters.
    pub classes: Vec<u32>,
    pub highlight: Vec<bool>,
}

impl VhlView {
    pub fn class_mask(&self, class_id: u32) -> Vec<bool> {
        self.classes.iter().map(|&c| c == class_id).collect()
    }

    pub fn mask(&self, class_id: u32) -> Vec<bool> {
        self.classes
            .iter()
            .zip(&self.highlight)
            .map(|(&c, &h)| h && c == class_id)
            .collect()
    }

    pub fn count(&self) -> usize {
        self.highlight.iter().filter(|h| **h).count()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VhlMasks {
    pub views: Vec<VhlView>,
}

impl VhlMasks {
    /// Highlight pixel count of `class_id` over all views.
    pub fn class_count(&self, class_id: u32) -> usize {
        self.views
            .iter()
            .map(|v| v.mask(class_id).iter().filter(|m| **m).count())
            .sum()
    }
}

/// Per pixel, `specular > max(τ_abs, τ_rel · median diffuse luminance of the class)`.
/// Pixels with class 0 are never highlights.
pub fn vhl_mask(specular_lum: &[f64], diffuse_lum: &[f64], classes: &[u32], config: &VhlConfig) -> Vec<bool> {
    let mut ids: Vec<u32> = classes.iter().copied().filter(|&c| c != 0).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut out = vec![false; classes.len()];
    for c in ids {
        let mut d: Vec<f64> = classes
            .iter()
            .zip(diffuse_lum)
            .filter(|(k, _)| **k == c)
            .map(|(_, v)| *v)
            .collect();
        let median = quantile_of(&mut d, 0.5).unwrap_or(0.0);
        let threshold = config.tau_abs.max(config.tau_rel * median);
        for (i, (&k, &s)) in classes.iter().zip(specular_lum).enumerate() {
            if k == c && s > threshold {
                out[i] = true;
            }
        }
    }
    out
}

/// Renders every view at uniform roughness with GGX sampling and thresholds it against the
/// class diffuse shading of the current albedo.
#[allow(clippy::too_many_arguments)]
pub fn detect_vhl(
    geometry: &SceneGeometry,
    tbl: &TblLight,
    cameras: &[Camera],
    semantic: &MaskImage,
    albedo: &TextureImage,
    irradiance: &dyn IrradianceSource,
    config: &VhlConfig,
) -> VhlMasks {
    let rough = TextureImage::filled(1, 1, &[config.roughness]);
    let views = cameras
        .par_iter()
        .enumerate()
        .map(|(v, cam)| {
            let gbuf = make_gbuffer(geometry, cam, Some(semantic), None);
            let render = RenderConfig {
                samples: config.samples,
                sampler: Sampler::Ggx,
                seed: mix_seed(&[config.seed, v as u64]),
                emitter_threshold: config.emitter_threshold,
                specular: true,
            };
            let spec = shade_specular(&gbuf, &rough, tbl, &render);
            let diff = shade_diffuse(&gbuf, albedo, irradiance);
            let emitters = emitter_mask(&gbuf, tbl.emissive(), config.emitter_threshold);
            let classes: Vec<u32> = gbuf
                .pixels
                .iter()
                .zip(&emitters)
                .map(|(p, &e)| if p.valid && !e { p.class_id } else { 0 })
                .collect();
            let lum = |img: &TextureImage| (0..img.pixel_count()).map(|i| luminance(img.rgb(i))).collect::<Vec<_>>();
            let highlight = vhl_mask(&lum(&spec), &lum(&diff), &classes, config);
            VhlView {
                width: cam.width,
                height: cam.height,
                classes,
                highlight,
            }
        })
        .collect();
    VhlMasks { views }
}
