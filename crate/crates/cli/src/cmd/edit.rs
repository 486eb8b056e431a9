use std::path::PathBuf;

use clap::Args;
use glam::DVec3;
use serde::Serialize;
use texir_core::assets::read_pfm;
use texir_core::irradiance::DEFAULT_BAKE_SAMPLES;
use texir_core::renderer::{edit_material, relight, BakeConfig};
use texir_core::{load_scene, Error, Result};

use crate::args::parse_vec3;
use crate::output::{prepare_out, Manifest};
use crate::Ctx;

#[derive(Args, Debug, Serialize)]
pub struct RelightArgs {
    pub scene: PathBuf,
    /// Replacement emissive texture (RGB PFM, same resolution as the scene's).
    #[arg(long)]
    pub emissive: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Hemisphere samples per irradiance texel of the re-bake.
    #[arg(long, default_value_t = DEFAULT_BAKE_SAMPLES)]
    pub samples: usize,
}

/// Writes the relit scene (new emission, re-baked irradiance, unchanged materials).
pub fn run_relight(ctx: &Ctx, args: RelightArgs) -> Result<()> {
    prepare_out(&args.out, &[&args.scene, &args.emissive])?;
    let mut manifest = Manifest::new("relight", ctx, Some(&args.scene), &args);
    let scene = load_scene(&args.scene)?;
    let emissive = read_pfm(&args.emissive)?;
    let bake = BakeConfig {
        samples: args.samples,
        seed: ctx.seed,
    };
    let relit = manifest.time("relight", || relight(&scene, emissive, &bake))?;
    manifest.output(relit.save(&args.out)?);
    manifest.write(&args.out)
}

#[derive(Args, Debug, Serialize)]
pub struct EditArgs {
    pub scene: PathBuf,
    /// Semantic class id to edit.
    #[arg(long = "class")]
    pub class_id: u32,
    /// New albedo `r,g,b` in [0, 1].
    #[arg(long, value_parser = parse_vec3)]
    pub albedo: Option<DVec3>,
    /// New roughness.
    #[arg(long)]
    pub roughness: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Writes the edited scene; every texel of the class takes the new material.
pub fn run_edit(ctx: &Ctx, args: EditArgs) -> Result<()> {
    if args.albedo.is_none() && args.roughness.is_none() {
        return Err(Error::InvalidInput("edit needs --albedo and/or --roughness".into()));
    }
    prepare_out(&args.out, &[&args.scene])?;
    let mut manifest = Manifest::new("edit", ctx, Some(&args.scene), &args);
    let scene = load_scene(&args.scene)?;
    let edited = edit_material(&scene, args.class_id, args.albedo, args.roughness)?;
    manifest.output(edited.save(&args.out)?);
    manifest.write(&args.out)
}
