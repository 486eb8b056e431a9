//! Scene-level driver: priors, the requested stages in order, checkpoints and the run
//! manifest.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stages::{run_stage, LossReport, OptimConfig, OptimState, Problem, Stage, StageReport};
use crate::assets::{write_atomic, write_mask_pgm, write_pfm, MaskImage, Scene, TextureImage};
use crate::error::{Error, Result};
use crate::irradiance::IrradianceTexture;
use crate::segmentation::{compute_rooms, detect_vhl, RoomMap, VhlMasks};
use crate::tbl::TblLight;

/// Upper bound on the texture-space room mask resolution; room lookups are nearest-texel.
const ROOM_MASK_RES: usize = 512;

pub struct OptimOutput {
    pub state: OptimState,
    pub stages: Vec<StageReport>,
    pub vhl: Option<VhlMasks>,
    pub rooms: Option<RoomMap>,
}

impl OptimOutput {
    /// The input scene with the estimated textures attached.
    pub fn apply(&self, scene: &Scene) -> Scene {
        let mut out = scene.clone();
        out.albedo = Some(self.state.albedo.clone());
        out.roughness = Some(self.state.roughness.clone());
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: OptimConfig,
    pub albedo_res: usize,
    pub roughness_res: usize,
    pub views: usize,
    pub stages: Vec<StageReport>,
    pub albedo_observed_fraction: f64,
    pub roughness_observed_fraction: f64,
    /// Highlight pixel count per class over all views.
    pub vhl_pixels: BTreeMap<u32, usize>,
    pub room_count: Option<u32>,
}

/// Runs `stages` (ascending, each at most once) on a scene with a baked irradiance texture
/// and a semantic mask. Starts from `init` when given, otherwise from uniform textures.
pub fn optimize(
    scene: &Scene,
    config: &OptimConfig,
    stages: &[Stage],
    init: Option<OptimState>,
    checkpoint_dir: Option<&Path>,
    mut on_epoch: impl FnMut(Stage, usize, &LossReport),
) -> Result<OptimOutput> {
    if stages.is_empty() || stages.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("stages must be a non-empty ascending list".into()));
    }
    let semantic = scene.semantic()?;
    let irt = scene
        .irradiance
        .clone()
        .ok_or_else(|| Error::InvalidInput("scene has no irradiance texture; run `bake` first".into()))?;
    let irt = IrradianceTexture::full(irt)?;
    let tbl = TblLight::new(&scene.geometry, &scene.emissive);

    let rooms = if stages.contains(&Stage::Joint) {
        let res = scene.atlas.roughness_res.clamp(1, ROOM_MASK_RES);
        Some(compute_rooms(&scene.geometry.mesh, &config.rooms, res)?)
    } else {
        None
    };
    let problem = Problem::new(
        tbl,
        &irt,
        &scene.cameras,
        &scene.images,
        Some(semantic),
        rooms.as_ref().map(|r| &r.texels),
        config.emitter_threshold,
    )?;
    let mut state = init.unwrap_or_else(|| OptimState::new(scene.atlas.albedo_res, scene.atlas.roughness_res, config));

    let mut reports = Vec::new();
    let mut vhl = None;
    for &stage in stages {
        if stage == Stage::Roughness {
            vhl = Some(detect_vhl(&scene.geometry, &tbl, &scene.cameras, semantic, &state.albedo, &irt, &config.vhl));
        }
        let report = run_stage(&problem, &mut state, stage, config, vhl.as_ref(), |e, r| on_epoch(stage, e, r))?;
        reports.push(report);
        if let Some(dir) = checkpoint_dir {
            write_checkpoint(dir, stage, &state)?;
            let manifest = RunManifest {
                config: *config,
                albedo_res: state.albedo.width(),
                roughness_res: state.roughness.width(),
                views: scene.cameras.len(),
                stages: reports.clone(),
                albedo_observed_fraction: fraction(&state.albedo_observed),
                roughness_observed_fraction: fraction(&state.roughness_observed),
                vhl_pixels: vhl.as_ref().map(vhl_counts).unwrap_or_default(),
                room_count: rooms.as_ref().map(|r| r.room_count),
            };
            let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Schema(e.to_string()))?;
            write_atomic(&dir.join("run_manifest.json"), json.as_bytes())?;
            if let Some(r) = &rooms {
                write_mask_pgm(&r.texels, dir.join("rooms.pgm"))?;
            }
        }
    }
    Ok(OptimOutput {
        state,
        stages: reports,
        vhl,
        rooms,
    })
}

fn fraction(mask: &[bool]) -> f64 {
    mask.iter().filter(|m| **m).count() as f64 / mask.len().max(1) as f64
}

fn vhl_counts(m: &VhlMasks) -> BTreeMap<u32, usize> {
    let mut out = BTreeMap::new();
    for v in &m.views {
        for (&c, &h) in v.classes.iter().zip(&v.highlight) {
            if h {
                *out.entry(c).or_insert(0) += 1;
            }
        }
    }
    out
}

/// Textures, Adam moments and coverage maps after `stage`, as `stage<n>_*.pfm/pgm`.
pub fn write_checkpoint(dir: &Path, stage: Stage, state: &OptimState) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let prefix = format!("stage{}", stage.index());
    let path = |name: &str| dir.join(format!("{prefix}_{name}"));
    write_pfm(&state.albedo, path("albedo.pfm"))?;
    write_pfm(&state.roughness, path("roughness.pfm"))?;
    for (name, tex, adam) in [
        ("albedo", &state.albedo, &state.adam_albedo),
        ("roughness", &state.roughness, &state.adam_roughness),
    ] {
        let (w, h, c) = (tex.width(), tex.height(), tex.channels());
        write_pfm(&TextureImage::from_data(w, h, c, adam.m.clone())?, path(&format!("{name}_adam_m.pfm")))?;
        write_pfm(&TextureImage::from_data(w, h, c, adam.v.clone())?, path(&format!("{name}_adam_v.pfm")))?;
    }
    for (name, tex, observed) in [
        ("albedo", &state.albedo, &state.albedo_observed),
        ("roughness", &state.roughness, &state.roughness_observed),
    ] {
        let mut mask = MaskImage::new(tex.width(), tex.height());
        for (i, &o) in observed.iter().enumerate() {
            if o {
                mask.set_texel(i % tex.width(), i / tex.width(), 1);
            }
        }
        write_mask_pgm(&mask, path(&format!("{name}_observed.pgm")))?;
    }
    Ok(())
}
