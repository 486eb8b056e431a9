use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use texir_core::assets::{read_pfm, write_ppm_preview};
use texir_core::optimizer::{optimize, OptimConfig, OptimState, Stage};
use texir_core::{load_scene, Error, Result, TextureImage};

use crate::args::AtlasArgs;
use crate::output::{io_err, prepare_out, Manifest};
use crate::Ctx;

#[derive(Args, Debug, Serialize)]
pub struct OptimizeArgs {
    /// Scene description with a baked irradiance texture and a semantic mask.
    pub scene: PathBuf,
    /// Output directory for textures, checkpoints and the optimized scene.
    #[arg(long)]
    pub out: PathBuf,
    /// Stages to run, ascending: 1 albedo, 2 roughness, 3 joint.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub stages: Vec<u8>,
    /// Epochs per stage.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Specular directions per pixel per step.
    #[arg(long)]
    pub specular_samples: Option<usize>,
    /// Starting albedo (RGB PFM); required to start at stage 2 or 3 without a checkpoint.
    #[arg(long)]
    pub init_albedo: Option<PathBuf>,
    /// Starting roughness (single-channel PFM).
    #[arg(long)]
    pub init_roughness: Option<PathBuf>,
    /// Full optimizer configuration as JSON; the flags above override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub atlas: AtlasArgs,
}

fn load_config(args: &OptimizeArgs, seed: u64) -> Result<OptimConfig> {
    let mut config = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", p.display())))?
        }
        None => OptimConfig::default(),
    };
    if let Some(e) = args.epochs {
        config.epochs = e;
    }
    if let Some(lr) = args.lr {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidInput("--lr must be positive".into()));
        }
        config.adam.lr = lr;
    }
    if let Some(s) = args.specular_samples {
        config.specular_samples = s;
    }
    config.seed = seed;
    config.vhl.seed = seed;
    Ok(config)
}

/// Latest checkpointed texture `stage<k>_<name>.pfm` in `dir` with `k < before`.
fn checkpoint(dir: &Path, name: &str, before: u8) -> Option<PathBuf> {
    (1..before)
        .rev()
        .map(|k| dir.join(format!("stage{k}_{name}.pfm")))
        .find(|p| p.is_file())
}

fn read_texture(path: &Path, channels: usize, what: &str) -> Result<TextureImage> {
    let t = read_pfm(path)?;
    if t.channels() != channels {
        return Err(Error::ShapeMismatch(format!(
            "{what} {} has {} channels, expected {channels}",
            path.display(),
            t.channels()
        )));
    }
    Ok(t)
}

/// Starting textures: explicit flags first, then checkpoints left in the output directory.
fn initial_state(args: &OptimizeArgs, first: Stage, config: &OptimConfig, res: (usize, usize)) -> Result<Option<OptimState>> {
    let albedo_path = args.init_albedo.clone().or_else(|| checkpoint(&args.out, "albedo", first.index()));
    if first != Stage::Albedo && albedo_path.is_none() {
        return Err(Error::InvalidInput(format!(
            "stage {} needs the stage-1 albedo: run stage 1 into {} first or pass --init-albedo",
            first.index(),
            args.out.display()
        )));
    }
    let roughness_path = args
        .init_roughness
        .clone()
        .or_else(|| checkpoint(&args.out, "roughness", first.index()).filter(|_| first == Stage::Joint));
    if albedo_path.is_none() && roughness_path.is_none() {
        return Ok(None);
    }
    let albedo = match &albedo_path {
        Some(p) => read_texture(p, 3, "albedo")?,
        None => TextureImage::filled(res.0, res.0, &[config.albedo_init; 3]),
    };
    let roughness = match &roughness_path {
        Some(p) => read_texture(p, 1, "roughness")?,
        None => TextureImage::filled(res.1, res.1, &[config.roughness_init]),
    };
    for p in albedo_path.iter().chain(&roughness_path) {
        log::info!("starting from {}", p.display());
    }
    let mut state = OptimState::from_textures(albedo, roughness, config);
    state.stage = first.index() - 1;
    Ok(Some(state))
}

pub fn run(ctx: &Ctx, args: OptimizeArgs) -> Result<()> {
    let inputs: Vec<&Path> = [Some(args.scene.as_path()), args.init_albedo.as_deref(), args.init_roughness.as_deref()]
        .into_iter()
        .flatten()
        .collect();
    prepare_out(&args.out, &inputs)?;
    let stages = args.stages.iter().map(|&i| Stage::from_index(i)).collect::<Result<Vec<_>>>()?;
    if stages.is_empty() || stages.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("--stages must list distinct stages in ascending order".into()));
    }
    let config = load_config(&args, ctx.seed)?;
    let mut manifest = Manifest::new("optimize", ctx, Some(&args.scene), (&args, config));

    let mut scene = load_scene(&args.scene)?;
    scene.atlas = args.atlas.apply(scene.atlas)?;
    let init = initial_state(&args, stages[0], &config, (scene.atlas.albedo_res, scene.atlas.roughness_res))?;

    let result = manifest.time("optimize", || {
        optimize(&scene, &config, &stages, init, Some(&args.out), |stage, epoch, report| {
            log::info!("stage {} epoch {epoch}: loss {:.6} (data {:.6})", stage.index(), report.total, report.data);
        })
    })?;

    let path = result.apply(&scene).save(&args.out)?;
    manifest.output(path);
    for name in ["albedo", "roughness"] {
        manifest.output(args.out.join(format!("{name}.pfm")));
    }
    write_ppm_preview(&result.state.albedo, args.out.join("albedo.ppm"))?;
    write_ppm_preview(&result.state.roughness, args.out.join("roughness.ppm"))?;
    manifest.output(args.out.join("albedo.ppm"));
    manifest.output(args.out.join("roughness.ppm"));
    manifest.output(args.out.join("run_manifest.json"));
    for s in &stages {
        manifest.output(args.out.join(format!("stage{}_albedo.pfm", s.index())));
        manifest.output(args.out.join(format!("stage{}_roughness.pfm", s.index())));
    }
    manifest.stages = result.stages;
    manifest.write(&args.out)
}
