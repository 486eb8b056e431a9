use std::path::PathBuf;

use clap::{Args, ValueEnum};
use glam::DVec3;
use serde::Serialize;
use texir_core::assets::{write_pfm, write_ppm_preview};
use texir_core::renderer::{render_scene, RenderConfig, Sampler};
use texir_core::sampling::mix_seed;
use texir_core::{load_scene, Camera, Error, Projection, Result};

use crate::args::parse_vec3;
use crate::output::{prepare_out, Manifest};
use crate::Ctx;

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerArg {
    Ggx,
    Cosine,
}

#[derive(Args, Debug, Serialize)]
pub struct RenderArgs {
    /// Scene with albedo, roughness and irradiance textures.
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Scene camera index to render (repeatable; default: every camera).
    #[arg(long)]
    pub camera: Vec<usize>,
    /// Novel view: camera position `x,y,z`.
    #[arg(long, value_parser = parse_vec3, requires = "target")]
    pub position: Option<DVec3>,
    /// Novel view: point looked at `x,y,z`.
    #[arg(long, value_parser = parse_vec3, requires = "position")]
    pub target: Option<DVec3>,
    /// Novel view: horizontal field of view in degrees.
    #[arg(long, default_value_t = 90.0)]
    pub fov: f64,
    /// Novel view: render an equirectangular panorama instead of a pinhole image.
    #[arg(long)]
    pub equirect: bool,
    /// Novel view width (default: the first camera's).
    #[arg(long)]
    pub width: Option<usize>,
    /// Novel view height (default: the first camera's).
    #[arg(long)]
    pub height: Option<usize>,
    /// Specular samples per pixel.
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = SamplerArg::Ggx)]
    pub sampler: SamplerArg,
    /// Emissive luminance above which a surface is shown as a light source.
    #[arg(long, default_value_t = 0.5)]
    pub emitter_threshold: f64,
    /// Diffuse only.
    #[arg(long)]
    pub no_specular: bool,
}

/// Writes `render_<camera>.pfm` (or `render_novel.pfm`) plus a `.ppm` preview of each.
pub fn run(ctx: &Ctx, args: RenderArgs) -> Result<()> {
    prepare_out(&args.out, &[&args.scene])?;
    let mut manifest = Manifest::new("render", ctx, Some(&args.scene), &args);
    let scene = load_scene(&args.scene)?;

    let mut jobs: Vec<(String, Camera, u64)> = Vec::new();
    if let (Some(position), Some(target)) = (args.position, args.target) {
        let first = scene.cameras.first();
        let width = args.width.or(first.map(|c| c.width)).unwrap_or(128);
        let height = args.height.or(first.map(|c| c.height)).unwrap_or(96);
        if width == 0 || height == 0 || position.distance(target) <= 0.0 {
            return Err(Error::InvalidInput("novel view needs a positive size and position != target".into()));
        }
        let projection = if args.equirect {
            Projection::Equirect
        } else if args.fov > 0.0 && args.fov < 180.0 {
            Projection::Pinhole { fov_deg: args.fov }
        } else {
            return Err(Error::InvalidInput("--fov must lie in (0, 180)".into()));
        };
        let cam = Camera::look_at(projection, width, height, position, target);
        jobs.push(("novel".into(), cam, u64::MAX));
    } else {
        let indices: Vec<usize> = if args.camera.is_empty() {
            (0..scene.cameras.len()).collect()
        } else {
            args.camera.clone()
        };
        for i in indices {
            let cam = scene.cameras.get(i).ok_or_else(|| {
                Error::InvalidInput(format!("camera {i} does not exist (scene has {})", scene.cameras.len()))
            })?;
            jobs.push((format!("{i:02}"), *cam, i as u64));
        }
    }

    let sampler = match args.sampler {
        SamplerArg::Ggx => Sampler::Ggx,
        SamplerArg::Cosine => Sampler::Cosine,
    };
    for (name, cam, stream) in jobs {
        let config = RenderConfig {
            samples: args.samples,
            sampler,
            seed: mix_seed(&[ctx.seed, stream]),
            emitter_threshold: args.emitter_threshold,
            specular: !args.no_specular,
        };
        let rendered = manifest.time(&format!("render_{name}"), || render_scene(&scene, &cam, &config))?;
        let pfm = args.out.join(format!("render_{name}.pfm"));
        let ppm = args.out.join(format!("render_{name}.ppm"));
        write_pfm(&rendered.image, &pfm)?;
        write_ppm_preview(&rendered.image, &ppm)?;
        manifest.output(pfm);
        manifest.output(ppm);
    }
    manifest.write(&args.out)
}
