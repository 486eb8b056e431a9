//! Ray-cast G-buffers and hybrid deferred shading: diffuse from precomputed irradiance,
//! specular by Monte-Carlo gathering against the TBL.

mod gbuffer;

use std::f64::consts::PI;

use glam::DVec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assets::{MaskImage, Scene, TextureImage};
use crate::brdf::{clamp_roughness, eval_diffuse, eval_specular, reflect, sample_cosine, sample_ggx};
use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::irradiance::{bake_irt, IrradianceSource, IrradianceTexture};
use crate::sampling::{luminance, stratified_2d, stream_rng, Frame};
use crate::tbl::TblLight;

pub use gbuffer::{make_gbuffer, GBuffer, GPixel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Cosine-weighted directions, independent of roughness.
    Cosine,
    /// GGX half-vector importance sampling.
    #[default]
    Ggx,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub samples: usize,
    pub sampler: Sampler,
    pub seed: u64,
    /// Emissive luminance above which a pixel shows the emitter instead of shaded material.
    pub emitter_threshold: f64,
    pub specular: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            samples: 16,
            sampler: Sampler::Ggx,
            seed: 0,
            emitter_threshold: 0.5,
            specular: true,
        }
    }
}

fn image_from(width: usize, height: usize, values: Vec<DVec3>) -> TextureImage {
    let mut img = TextureImage::new(width, height, 3);
    for (i, v) in values.into_iter().enumerate() {
        img.set_rgb(i, v);
    }
    img
}

/// `L_d = A(uv)/π · Ir(x, uv)` per valid pixel.
pub fn shade_diffuse(gbuf: &GBuffer, albedo: &TextureImage, irradiance: &dyn IrradianceSource) -> TextureImage {
    let values = gbuf
        .pixels
        .par_iter()
        .map(|p| {
            if !p.valid {
                return DVec3::ZERO;
            }
            eval_diffuse(albedo.sample(p.uv)) * irradiance.irradiance(p.position, p.uv)
        })
        .collect();
    image_from(gbuf.width, gbuf.height, values)
}

/// Fixed cosine-distributed sample directions and their TBL radiance, `samples` per pixel.
///
/// With these frozen, `L_s(R) = π/K Σ_k f_s(n, v, l_k, R) Q_k` is a smooth function of the
/// roughness and its derivative is exact.
#[derive(Clone, Debug)]
pub struct SpecularSamples {
    pub samples: usize,
    pub directions: Vec<DVec3>,
    pub radiance: Vec<DVec3>,
}

impl SpecularSamples {
    pub fn gather(gbuf: &GBuffer, tbl: &TblLight, samples: usize, seed: u64) -> Self {
        let per_pixel: Vec<(Vec<DVec3>, Vec<DVec3>)> = gbuf
            .pixels
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                if !p.valid {
                    return (vec![DVec3::ZERO; samples], vec![DVec3::ZERO; samples]);
                }
                let mut rng = stream_rng(seed, i as u64);
                let frame = Frame::from_normal(p.normal);
                stratified_2d(samples, &mut rng)
                    .into_iter()
                    .map(|u| {
                        let l = frame.to_world(sample_cosine(u.x, u.y).0);
                        (l, tbl.query_radiance(p.position, l))
                    })
                    .unzip()
            })
            .collect();
        let mut directions = Vec::with_capacity(gbuf.len() * samples);
        let mut radiance = Vec::with_capacity(gbuf.len() * samples);
        for (d, q) in per_pixel {
            directions.extend(d);
            radiance.extend(q);
        }
        SpecularSamples {
            samples,
            directions,
            radiance,
        }
    }

    fn range(&self, pixel: usize) -> std::ops::Range<usize> {
        pixel * self.samples..(pixel + 1) * self.samples
    }

    /// Specular radiance of a pixel at roughness `r`.
    pub fn shade(&self, pixel: usize, p: &GPixel, r: f64) -> DVec3 {
        let r = clamp_roughness(r);
        let mut sum = DVec3::ZERO;
        for k in self.range(pixel) {
            sum += self.radiance[k] * eval_specular(p.normal, p.view, self.directions[k], r);
        }
        sum * (PI / self.samples as f64)
    }

    /// Specular radiance and its derivative with respect to the roughness.
    pub fn shade_with_derivative(&self, pixel: usize, p: &GPixel, r: f64) -> (DVec3, DVec3) {
        let (mut value, mut deriv) = (DVec3::ZERO, DVec3::ZERO);
        for k in self.range(pixel) {
            let l = self.directions[k];
            value += self.radiance[k] * eval_specular(p.normal, p.view, l, r);
            deriv += self.radiance[k] * crate::brdf::d_specular_d_roughness(p.normal, p.view, l, r);
        }
        let w = PI / self.samples as f64;
        (value * w, deriv * w)
    }
}

/// Per-pixel Monte-Carlo estimate of `∫ f_s Q cosθ dω`.
pub fn shade_specular(gbuf: &GBuffer, roughness: &TextureImage, tbl: &TblLight, config: &RenderConfig) -> TextureImage {
    let values = match config.sampler {
        Sampler::Cosine => {
            let cache = SpecularSamples::gather(gbuf, tbl, config.samples, config.seed);
            gbuf.pixels
                .par_iter()
                .enumerate()
                .map(|(i, p)| {
                    if p.valid {
                        cache.shade(i, p, roughness.sample_scalar(p.uv))
                    } else {
                        DVec3::ZERO
                    }
                })
                .collect()
        }
        Sampler::Ggx => gbuf
            .pixels
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                if !p.valid {
                    return DVec3::ZERO;
                }
                ggx_estimate(p, clamp_roughness(roughness.sample_scalar(p.uv)), tbl, config.samples, config.seed, i as u64)
            })
            .collect(),
    };
    image_from(gbuf.width, gbuf.height, values)
}

/// GGX importance-sampled specular estimate; `pdf_l = pdf_h / (4 v·h)`.
pub fn ggx_estimate(p: &GPixel, r: f64, tbl: &TblLight, samples: usize, seed: u64, stream: u64) -> DVec3 {
    let mut rng = stream_rng(seed, stream);
    let frame = Frame::from_normal(p.normal);
    let mut sum = DVec3::ZERO;
    for u in stratified_2d(samples, &mut rng) {
        let (h_local, pdf_h) = sample_ggx(u.x, u.y, r);
        let h = frame.to_world(h_local);
        let l = reflect(p.view, h);
        let (n_dot_l, v_dot_h) = (p.normal.dot(l), p.view.dot(h));
        if n_dot_l <= 0.0 || v_dot_h <= 0.0 || pdf_h <= 0.0 {
            continue;
        }
        let pdf_l = pdf_h / (4.0 * v_dot_h);
        let f = eval_specular(p.normal, p.view, l, r);
        if f > 0.0 {
            sum += tbl.query_radiance(p.position, l) * (f * n_dot_l / pdf_l);
        }
    }
    sum / samples as f64
}

/// Pixels whose surface shows an emitter texel brighter than `threshold`.
pub fn emitter_mask(gbuf: &GBuffer, emissive: &TextureImage, threshold: f64) -> Vec<bool> {
    gbuf.pixels
        .iter()
        .map(|p| p.valid && luminance(emissive.sample(p.uv)) > threshold)
        .collect()
}

/// Materials and lighting needed to shade a view.
#[derive(Clone, Copy)]
pub struct ShadingInputs<'a> {
    pub tbl: TblLight<'a>,
    pub albedo: &'a TextureImage,
    pub roughness: &'a TextureImage,
    pub irradiance: &'a dyn IrradianceSource,
    pub semantic: Option<&'a MaskImage>,
}

#[derive(Clone, Debug)]
pub struct Rendered {
    pub image: TextureImage,
    pub diffuse: TextureImage,
    pub specular: TextureImage,
    pub emitters: Vec<bool>,
    pub gbuffer: GBuffer,
}

/// `L_o = L_d + L_s`, with emitter pixels showing the emissive texture instead.
pub fn render(inputs: &ShadingInputs, camera: &Camera, config: &RenderConfig) -> Rendered {
    let gbuffer = make_gbuffer(inputs.tbl.geometry(), camera, inputs.semantic, None);
    let diffuse = shade_diffuse(&gbuffer, inputs.albedo, inputs.irradiance);
    let specular = if config.specular {
        shade_specular(&gbuffer, inputs.roughness, &inputs.tbl, config)
    } else {
        TextureImage::new(camera.width, camera.height, 3)
    };
    let emitters = emitter_mask(&gbuffer, inputs.tbl.emissive(), config.emitter_threshold);
    let values = (0..gbuffer.len())
        .map(|i| {
            if emitters[i] {
                inputs.tbl.emissive().sample(gbuffer.pixels[i].uv)
            } else {
                diffuse.rgb(i) + specular.rgb(i)
            }
        })
        .collect();
    Rendered {
        image: image_from(camera.width, camera.height, values),
        diffuse,
        specular,
        emitters,
        gbuffer,
    }
}

/// Renders a camera of a scene that carries albedo, roughness and irradiance textures.
pub fn render_scene(scene: &Scene, camera: &Camera, config: &RenderConfig) -> Result<Rendered> {
    let missing = |what: &str| Error::InvalidInput(format!("scene has no {what} texture"));
    let albedo = scene.albedo.as_ref().ok_or_else(|| missing("albedo"))?;
    let roughness = scene.roughness.as_ref().ok_or_else(|| missing("roughness"))?;
    let irt = scene.irradiance.as_ref().ok_or_else(|| missing("irradiance"))?;
    let irt = IrradianceTexture::full(irt.clone())?;
    let inputs = ShadingInputs {
        tbl: TblLight::new(&scene.geometry, &scene.emissive),
        albedo,
        roughness,
        irradiance: &irt,
        semantic: scene.semantic.as_ref(),
    };
    Ok(render(&inputs, camera, config))
}

/// Bake settings used when lighting changes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BakeConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for BakeConfig {
    fn default() -> Self {
        BakeConfig {
            samples: crate::irradiance::DEFAULT_BAKE_SAMPLES,
            seed: 0,
        }
    }
}

/// Replaces the emission and re-bakes the irradiance texture; materials are untouched.
pub fn relight(scene: &Scene, emissive: TextureImage, bake: &BakeConfig) -> Result<Scene> {
    if !emissive.same_shape(&scene.emissive) {
        return Err(Error::ShapeMismatch(format!(
            "new emissive texture is {}x{}x{}, scene uses {}x{}x{}",
            emissive.width(),
            emissive.height(),
            emissive.channels(),
            scene.emissive.width(),
            scene.emissive.height(),
            scene.emissive.channels()
        )));
    }
    if let Some(i) = emissive.first_non_finite() {
        return Err(Error::InvalidInput(format!("emissive texture has a non-finite value at sample {i}")));
    }
    if emissive.data().iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidInput("emissive texture has negative values".into()));
    }
    let mut out = scene.clone();
    out.emissive = emissive;
    let res = scene.irradiance.as_ref().map_or(scene.atlas.irt_res, |t| t.width());
    let irt = bake_irt(&TblLight::new(&out.geometry, &out.emissive), res, bake.samples, bake.seed)?;
    out.irradiance = Some(irt.texture);
    Ok(out)
}

/// Overwrites albedo and/or roughness on every texel whose class id matches.
pub fn edit_material(scene: &Scene, class_id: u32, albedo: Option<DVec3>, roughness: Option<f64>) -> Result<Scene> {
    let semantic = scene.semantic()?;
    if class_id == 0 || !semantic.labels().contains(&class_id) {
        return Err(Error::InvalidInput(format!("class {class_id} does not occur in the semantic mask")));
    }
    let mut out = scene.clone();
    if let Some(a) = albedo {
        if !a.is_finite() || a.min_element() < 0.0 || a.max_element() > 1.0 {
            return Err(Error::InvalidInput("albedo must lie in [0, 1]".into()));
        }
        let tex = out.albedo.as_mut().ok_or_else(|| Error::InvalidInput("scene has no albedo texture".into()))?;
        for i in 0..tex.pixel_count() {
            if semantic.at_uv(tex.texel_center(i)) == class_id {
                tex.set_rgb(i, a);
            }
        }
    }
    if let Some(r) = roughness {
        if !r.is_finite() || !(crate::brdf::R_MIN..=1.0).contains(&r) {
            return Err(Error::InvalidInput(format!("roughness must lie in [{}, 1]", crate::brdf::R_MIN)));
        }
        let tex = out.roughness.as_mut().ok_or_else(|| Error::InvalidInput("scene has no roughness texture".into()))?;
        for i in 0..tex.pixel_count() {
            if semantic.at_uv(tex.texel_center(i)) == class_id {
                tex.pixel_mut(i)[0] = r;
            }
        }
    }
    Ok(out)
}
