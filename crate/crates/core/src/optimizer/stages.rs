//! Per-view loss evaluation with analytic texture gradients, and the three optimization
//! stages built on it.

use std::f64::consts::PI;

use glam::DVec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::backprop::TextureGradient;
use super::losses::{loss_data, loss_propagation, loss_room_smooth, loss_semantic_smooth};
use crate::assets::{MaskImage, TextureImage};
use crate::brdf::R_MIN;
use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::irradiance::IrradianceSource;
use crate::renderer::{emitter_mask, make_gbuffer, GBuffer, SpecularSamples};
use crate::sampling::mix_seed;
use crate::segmentation::{RoomParams, VhlConfig, VhlMasks, VhlView};
use crate::tbl::TblLight;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    pub adam: AdamConfig,
    pub epochs: usize,
    pub beta_ssa: f64,
    pub beta_sp: f64,
    pub beta_ssr: f64,
    pub quantile: f64,
    /// Cosine-sampled directions per pixel for the specular term, redrawn every step.
    pub specular_samples: usize,
    pub seed: u64,
    pub albedo_init: f64,
    pub roughness_init: f64,
    pub emitter_threshold: f64,
    pub vhl: VhlConfig,
    pub rooms: RoomParams,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            adam: AdamConfig::default(),
            epochs: 40,
            beta_ssa: 10.0,
            beta_sp: 1.0,
            beta_ssr: 0.1,
            quantile: 0.4,
            specular_samples: 16,
            seed: 0,
            albedo_init: 0.5,
            roughness_init: 0.5,
            emitter_threshold: 0.5,
            vhl: VhlConfig::default(),
            rooms: RoomParams::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    /// Coarse Lambertian albedo with semantic smoothness.
    Albedo = 1,
    /// Roughness on highlights, propagated within classes; albedo frozen.
    Roughness = 2,
    /// Joint refinement with semantic and room smoothness on roughness.
    Joint = 3,
}

impl Stage {
    pub fn from_index(i: u8) -> Result<Stage> {
        match i {
            1 => Ok(Stage::Albedo),
            2 => Ok(Stage::Roughness),
            3 => Ok(Stage::Joint),
            _ => Err(Error::InvalidInput(format!("stage {i} does not exist (expected 1, 2 or 3)"))),
        }
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    fn updates_albedo(self) -> bool {
        self != Stage::Roughness
    }

    fn updates_roughness(self) -> bool {
        self != Stage::Albedo
    }
}

/// One posed input image with its cached G-buffer and per-pixel labels.
pub struct View {
    pub camera: Camera,
    pub image: TextureImage,
    pub gbuffer: GBuffer,
    /// Valid, non-emitter pixels: the only ones any loss sees.
    pub include: Vec<bool>,
    /// Class and room id per pixel, 0 outside `include`.
    pub classes: Vec<u32>,
    pub rooms: Vec<u32>,
    irradiance: Vec<DVec3>,
}

impl View {
    pub fn pixel_count(&self) -> usize {
        self.include.iter().filter(|m| **m).count()
    }
}

/// Fixed inputs of the optimization: lighting, irradiance and the input views.
pub struct Problem<'a> {
    pub tbl: TblLight<'a>,
    pub views: Vec<View>,
}

impl<'a> Problem<'a> {
    pub fn new(
        tbl: TblLight<'a>,
        irradiance: &dyn IrradianceSource,
        cameras: &[Camera],
        images: &[TextureImage],
        semantic: Option<&MaskImage>,
        rooms: Option<&MaskImage>,
        emitter_threshold: f64,
    ) -> Result<Self> {
        if cameras.len() != images.len() {
            return Err(Error::ShapeMismatch(format!("{} cameras but {} images", cameras.len(), images.len())));
        }
        if cameras.is_empty() {
            return Err(Error::InvalidInput("optimization needs at least one view".into()));
        }
        let mut views = Vec::with_capacity(cameras.len());
        for (camera, image) in cameras.iter().zip(images) {
            if image.width() != camera.width || image.height() != camera.height || image.channels() != 3 {
                return Err(Error::ShapeMismatch("input image does not match its camera".into()));
            }
            let gbuffer = make_gbuffer(tbl.geometry(), camera, semantic, rooms);
            let emitters = emitter_mask(&gbuffer, tbl.emissive(), emitter_threshold);
            let include: Vec<bool> = gbuffer.pixels.iter().zip(&emitters).map(|(p, e)| p.valid && !e).collect();
            let label = |f: fn(&crate::renderer::GPixel) -> u32| -> Vec<u32> {
                gbuffer.pixels.iter().zip(&include).map(|(p, &m)| if m { f(p) } else { 0 }).collect()
            };
            let classes = label(|p| p.class_id);
            let rooms = label(|p| p.room_id);
            let irradiance = gbuffer
                .pixels
                .par_iter()
                .zip(&include)
                .map(|(p, &m)| if m { irradiance.irradiance(p.position, p.uv) } else { DVec3::ZERO })
                .collect();
            views.push(View {
                camera: *camera,
                image: image.clone(),
                gbuffer,
                include,
                classes,
                rooms,
                irradiance,
            });
        }
        Ok(Problem { tbl, views })
    }
}

/// Textures being estimated plus the optimizer state for each.
#[derive(Clone, Debug)]
pub struct OptimState {
    pub albedo: TextureImage,
    pub roughness: TextureImage,
    pub adam_albedo: Adam,
    pub adam_roughness: Adam,
    /// Last completed stage (0 before stage 1).
    pub stage: u8,
    pub steps: u64,
    /// Texels that received gradient from at least one view.
    pub albedo_observed: Vec<bool>,
    pub roughness_observed: Vec<bool>,
}

impl OptimState {
    pub fn new(albedo_res: usize, roughness_res: usize, config: &OptimConfig) -> Self {
        Self::from_textures(
            TextureImage::filled(albedo_res, albedo_res, &[config.albedo_init; 3]),
            TextureImage::filled(roughness_res, roughness_res, &[config.roughness_init]),
            config,
        )
    }

    pub fn from_textures(albedo: TextureImage, roughness: TextureImage, config: &OptimConfig) -> Self {
        OptimState {
            adam_albedo: Adam::new(config.adam, albedo.data().len()),
            adam_roughness: Adam::new(config.adam, roughness.data().len()),
            albedo_observed: vec![false; albedo.pixel_count()],
            roughness_observed: vec![false; roughness.pixel_count()],
            albedo,
            roughness,
            stage: 0,
            steps: 0,
        }
    }
}

/// Loss terms of one view. `ss`, `sp` and `rs` are normalized per included pixel (and
/// channel), so they sit on the scale of the mean-absolute data term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViewLoss {
    pub view: usize,
    pub data: f64,
    pub ss: f64,
    pub sp: f64,
    pub rs: f64,
    pub total: f64,
}

/// Per-term losses averaged over views, with the per-view breakdown.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub data: f64,
    pub ss: f64,
    pub sp: f64,
    pub rs: f64,
    pub total: f64,
    pub per_view: Vec<ViewLoss>,
}

impl LossReport {
    pub fn from_views(per_view: Vec<ViewLoss>) -> Self {
        let n = per_view.len().max(1) as f64;
        let avg = |f: fn(&ViewLoss) -> f64| per_view.iter().map(f).sum::<f64>() / n;
        LossReport {
            data: avg(|v| v.data),
            ss: avg(|v| v.ss),
            sp: avg(|v| v.sp),
            rs: avg(|v| v.rs),
            total: avg(|v| v.total),
            per_view,
        }
    }
}

/// Term weights of one stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weights {
    pub ss: f64,
    pub sp: f64,
    pub rs: f64,
}

impl Weights {
    pub fn for_stage(stage: Stage, config: &OptimConfig) -> Self {
        match stage {
            Stage::Albedo => Weights {
                ss: config.beta_ssa,
                sp: 0.0,
                rs: 0.0,
            },
            Stage::Roughness => Weights {
                ss: 0.0,
                sp: config.beta_sp,
                rs: 0.0,
            },
            Stage::Joint => Weights {
                ss: config.beta_ssr,
                sp: 0.0,
                rs: config.beta_ssr,
            },
        }
    }
}

pub struct ViewEval {
    pub loss: ViewLoss,
    pub albedo: Option<TextureGradient>,
    pub roughness: Option<TextureGradient>,
}

/// Loss of one view and its gradient with respect to the texture(s) the stage optimizes.
///
/// Stage 1 renders `L_d` only; later stages add the specular term estimated with the frozen
/// `samples`, which makes it a smooth function of roughness.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_view(
    problem: &Problem,
    view_index: usize,
    albedo: &TextureImage,
    roughness: &TextureImage,
    stage: Stage,
    weights: &Weights,
    samples: Option<&SpecularSamples>,
    vhl: Option<&VhlView>,
    quantile: f64,
) -> Result<ViewEval> {
    let view = &problem.views[view_index];
    let specular = stage != Stage::Albedo;
    if specular && samples.is_none() {
        return Err(Error::InvalidInput("specular stages need frozen sample directions".into()));
    }
    struct Px {
        a: DVec3,
        r: f64,
        color: DVec3,
        dcolor_dr: DVec3,
    }
    let px: Vec<Px> = view
        .gbuffer
        .pixels
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if !view.include[i] {
                return Px {
                    a: DVec3::ZERO,
                    r: 0.0,
                    color: DVec3::ZERO,
                    dcolor_dr: DVec3::ZERO,
                };
            }
            let a = albedo.sample(p.uv);
            let mut color = a / PI * view.irradiance[i];
            let (mut r, mut dcolor_dr) = (0.0, DVec3::ZERO);
            if specular {
                r = roughness.sample_scalar(p.uv);
                let (ls, dls) = samples.expect("checked above").shade_with_derivative(i, p, r);
                color += ls;
                dcolor_dr = dls;
            }
            Px { a, r, color, dcolor_dr }
        })
        .collect();

    let mut render = TextureImage::new(view.camera.width, view.camera.height, 3);
    for (i, p) in px.iter().enumerate() {
        render.set_rgb(i, p.color);
    }
    let (data, g_img) = loss_data(&render, &view.image, &view.include)?;
    let n = view.pixel_count().max(1) as f64;

    let mut loss = ViewLoss {
        view: view_index,
        data,
        ..ViewLoss::default()
    };
    // Image-space gradients of the regularizers, already weighted and normalized.
    let mut reg_a = vec![0.0; px.len() * 3];
    let mut reg_r = vec![0.0; px.len()];
    if weights.ss != 0.0 {
        match stage {
            Stage::Albedo => {
                let feat: Vec<f64> = px.iter().flat_map(|p| p.a.to_array()).collect();
                let (l, g) = loss_semantic_smooth(&feat, 3, &view.classes);
                loss.ss = l / (3.0 * n);
                for (r, g) in reg_a.iter_mut().zip(g) {
                    *r += weights.ss * g / (3.0 * n);
                }
            }
            _ => {
                let feat: Vec<f64> = px.iter().map(|p| p.r).collect();
                let (l, g) = loss_semantic_smooth(&feat, 1, &view.classes);
                loss.ss = l / n;
                for (r, g) in reg_r.iter_mut().zip(g) {
                    *r += weights.ss * g / n;
                }
            }
        }
    }
    if weights.rs != 0.0 {
        let feat: Vec<f64> = px.iter().map(|p| p.r).collect();
        let (l, g) = loss_room_smooth(&feat, &view.rooms);
        loss.rs = l / n;
        for (r, g) in reg_r.iter_mut().zip(g) {
            *r += weights.rs * g / n;
        }
    }
    if weights.sp != 0.0 {
        if let Some(vhl) = vhl {
            let feat: Vec<f64> = px.iter().map(|p| p.r).collect();
            let (l, g) = loss_propagation(&feat, &view.classes, &vhl.highlight, quantile);
            loss.sp = l / n;
            for (r, g) in reg_r.iter_mut().zip(g) {
                *r += weights.sp * g / n;
            }
        }
    }
    loss.total = loss.data + weights.ss * loss.ss + weights.sp * loss.sp + weights.rs * loss.rs;

    let mut grad_a = stage.updates_albedo().then(|| TextureGradient::like(albedo));
    let mut grad_r = stage.updates_roughness().then(|| TextureGradient::like(roughness));
    for (i, p) in view.gbuffer.pixels.iter().enumerate() {
        if !view.include[i] {
            continue;
        }
        let g = DVec3::new(g_img[3 * i], g_img[3 * i + 1], g_img[3 * i + 2]);
        if let Some(ga) = grad_a.as_mut() {
            let d = g * view.irradiance[i] / PI + DVec3::from_slice(&reg_a[3 * i..3 * i + 3]);
            ga.scatter(p.uv, &d.to_array());
        }
        if let Some(gr) = grad_r.as_mut() {
            let d = g.dot(px[i].dcolor_dr) + reg_r[i];
            gr.scatter(p.uv, &[d]);
        }
    }
    Ok(ViewEval {
        loss,
        albedo: grad_a,
        roughness: grad_r,
    })
}

/// Adam step followed by projection onto `[lo, hi]`. Non-finite gradients are rejected before
/// anything is modified.
pub fn projected_step(adam: &mut Adam, texture: &mut TextureImage, grad: &TextureImage, name: &'static str, lo: f64, hi: f64) -> Result<()> {
    let ch = texture.channels();
    if let Some(k) = grad.data().iter().position(|g| !g.is_finite()) {
        let texel = k / ch;
        return Err(Error::NonFiniteGradient {
            texture: name,
            x: texel % texture.width(),
            y: texel / texture.width(),
        });
    }
    adam.step(texture.data_mut(), grad.data());
    for v in texture.data_mut() {
        *v = v.clamp(lo, hi);
    }
    Ok(())
}

/// Mean total loss of every epoch and the last epoch's report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: u8,
    pub epoch_losses: Vec<f64>,
    pub final_report: LossReport,
}

/// Runs one stage: `epochs` passes over the views in order, one projected Adam step per
/// view. Moments of the textures the stage updates start from zero.
pub fn run_stage(
    problem: &Problem,
    state: &mut OptimState,
    stage: Stage,
    config: &OptimConfig,
    vhl: Option<&VhlMasks>,
    mut on_epoch: impl FnMut(usize, &LossReport),
) -> Result<StageReport> {
    if stage == Stage::Roughness && vhl.is_none() {
        return Err(Error::InvalidInput("stage 2 needs highlight masks".into()));
    }
    if let Some(v) = vhl {
        if v.views.len() != problem.views.len() {
            return Err(Error::ShapeMismatch("highlight masks do not match the views".into()));
        }
    }
    let weights = Weights::for_stage(stage, config);
    if stage.updates_albedo() {
        state.adam_albedo = Adam::new(config.adam, state.albedo.data().len());
    }
    if stage.updates_roughness() {
        state.adam_roughness = Adam::new(config.adam, state.roughness.data().len());
    }
    let mut report = StageReport {
        stage: stage.index(),
        ..StageReport::default()
    };
    for epoch in 0..config.epochs {
        let mut per_view = Vec::with_capacity(problem.views.len());
        for v in 0..problem.views.len() {
            let samples = (stage != Stage::Albedo).then(|| {
                let seed = mix_seed(&[config.seed, stage.index() as u64, epoch as u64, v as u64]);
                SpecularSamples::gather(&problem.views[v].gbuffer, &problem.tbl, config.specular_samples, seed)
            });
            let eval = evaluate_view(
                problem,
                v,
                &state.albedo,
                &state.roughness,
                stage,
                &weights,
                samples.as_ref(),
                vhl.map(|m| &m.views[v]),
                config.quantile,
            )?;
            if !eval.loss.total.is_finite() {
                return Err(Error::Divergence {
                    what: "material optimization",
                    epoch,
                });
            }
            if let Some(g) = &eval.albedo {
                projected_step(&mut state.adam_albedo, &mut state.albedo, &g.grad, "albedo", 0.0, 1.0)?;
                mark(&mut state.albedo_observed, &g.touched);
            }
            if let Some(g) = &eval.roughness {
                projected_step(&mut state.adam_roughness, &mut state.roughness, &g.grad, "roughness", R_MIN, 1.0)?;
                mark(&mut state.roughness_observed, &g.touched);
            }
            state.steps += 1;
            per_view.push(eval.loss);
        }
        let epoch_report = LossReport::from_views(per_view);
        on_epoch(epoch, &epoch_report);
        report.epoch_losses.push(epoch_report.total);
        report.final_report = epoch_report;
    }
    state.stage = stage.index();
    Ok(report)
}

fn mark(observed: &mut [bool], touched: &[bool]) {
    for (o, t) in observed.iter_mut().zip(touched) {
        *o |= *t;
    }
}
