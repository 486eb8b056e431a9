use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;
use texir_core::assets::{read_scene_file, save_scene_file, write_mask_pgm};
use texir_core::irradiance::{bake_irt, DEFAULT_BAKE_SAMPLES};
use texir_core::tbl::{build_tbl_from_views, TblLight};
use texir_core::{load_scene, Result};

use crate::args::AtlasArgs;
use crate::output::{io_err, prepare_out, Manifest};
use crate::Ctx;

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TblSource {
    /// Project the posed HDR images onto the mesh.
    Views,
    /// Keep the scene's emissive texture.
    Scene,
}

#[derive(Args, Debug, Serialize)]
pub struct BakeArgs {
    /// Scene description (scene.json).
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Hemisphere samples per irradiance texel.
    #[arg(long, default_value_t = DEFAULT_BAKE_SAMPLES)]
    pub samples: usize,
    /// Where the lighting texture comes from.
    #[arg(long, value_enum, default_value_t = TblSource::Views)]
    pub tbl_source: TblSource,
    /// Resolution of the lighting texture built from views (default: the scene's).
    #[arg(long)]
    pub emissive_res: Option<usize>,
    #[command(flatten)]
    pub atlas: AtlasArgs,
}

/// Writes a baked copy of the scene: `irt.pfm`, `irt_coverage.pgm`, the lighting texture
/// (with `tbl_coverage.pgm` when built from views) and a `scene.json` referencing them.
pub fn run(ctx: &Ctx, args: BakeArgs) -> Result<()> {
    prepare_out(&args.out, &[&args.scene])?;
    let mut manifest = Manifest::new("bake", ctx, Some(&args.scene), &args);
    let mut scene = load_scene(&args.scene)?;
    scene.atlas = args.atlas.apply(scene.atlas)?;

    if args.tbl_source == TblSource::Views {
        let res = args.emissive_res.unwrap_or(scene.emissive.width());
        let built = manifest.time("tbl_from_views", || {
            build_tbl_from_views(&scene.geometry, &scene.cameras, &scene.images, res)
        })?;
        let cov = args.out.join("tbl_coverage.pgm");
        write_mask_pgm(&built.coverage, &cov)?;
        manifest.output(cov);
        scene.emissive = built.texture;
    }

    let tbl = TblLight::new(&scene.geometry, &scene.emissive);
    let irt = manifest.time("bake_irt", || bake_irt(&tbl, scene.atlas.irt_res, args.samples, ctx.seed))?;
    irt.save(args.out.join("irt"))?;
    manifest.output(args.out.join("irt.pfm"));
    manifest.output(args.out.join("irt_coverage.pgm"));

    scene.irradiance = Some(irt.texture);
    let scene_path = scene.save(&args.out)?;
    // Point the scene at irt.pfm rather than keeping a second copy of the same texture.
    let mut file = read_scene_file(&scene_path)?;
    if let Some(dup) = file.irradiance_texture.replace("irt.pfm".into()) {
        let dup = args.out.join(dup);
        std::fs::remove_file(&dup).map_err(|e| io_err(&dup, e))?;
    }
    save_scene_file(&file, &scene_path)?;
    manifest.output(scene_path);
    manifest.write(&args.out)
}
