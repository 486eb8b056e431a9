use std::path::{Path, PathBuf};

use clap::Args;
use glam::DVec3;
use serde::Serialize;
use texir_core::assets::{read_pfm, write_atomic, write_pfm, write_ppm_preview};
use texir_core::eval::{compare, sphere_harness, HarnessConfig, SgConfig, SphereConfig};
use texir_core::tbl::TblLight;
use texir_core::{load_scene, Error, Result};

use crate::args::parse_vec3;
use crate::output::{prepare_out, Manifest};
use crate::Ctx;

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::Schema(e.to_string()))?;
    write_atomic(path, json.as_bytes())
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    /// Estimated image (PFM).
    pub image: PathBuf,
    /// Reference image (PFM) of the same resolution.
    pub reference: PathBuf,
    /// Also write `metrics.json` and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Prints MSE, PSNR, MAE and SSIM of the tonemapped pair as JSON.
pub fn run_eval(ctx: &Ctx, args: EvalArgs) -> Result<()> {
    let a = read_pfm(&args.image)?;
    let b = read_pfm(&args.reference)?;
    let metrics = compare(&a, &b)?;
    let json = serde_json::to_string_pretty(&metrics).map_err(|e| Error::Schema(e.to_string()))?;
    println!("{json}");
    if let Some(out) = &args.out {
        prepare_out(out, &[&args.image, &args.reference])?;
        let mut manifest = Manifest::new("eval", ctx, None, &args);
        let path = out.join("metrics.json");
        write_atomic(&path, json.as_bytes())?;
        manifest.output(path);
        manifest.write(out)?;
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct SpheresArgs {
    /// Scene whose lighting texture is probed.
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Probe position `x,y,z` (default: center of the mesh bounds).
    #[arg(long, value_parser = parse_vec3)]
    pub probe: Option<DVec3>,
    /// Direction from the spheres toward the viewer.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,1")]
    pub view: DVec3,
    /// Sphere image side in pixels.
    #[arg(long, default_value_t = 64)]
    pub resolution: usize,
    /// Samples per pixel for each of the diffuse and specular estimates.
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long, default_value_t = 5)]
    pub sh_order: usize,
    /// Directions used for the SH projection.
    #[arg(long, default_value_t = 1 << 16)]
    pub sh_samples: usize,
    #[arg(long, default_value_t = 12)]
    pub sg_lobes: usize,
    /// Directions used for the SG fit.
    #[arg(long, default_value_t = 4096)]
    pub sg_samples: usize,
    /// Adam steps of the SG fit.
    #[arg(long, default_value_t = 500)]
    pub sg_steps: usize,
}

/// Writes `report.json`, the fitted `sh.json` and `sg.json`, and every sphere image.
pub fn run_spheres(ctx: &Ctx, args: SpheresArgs) -> Result<()> {
    prepare_out(&args.out, &[&args.scene])?;
    let mut manifest = Manifest::new("spheres", ctx, Some(&args.scene), &args);
    let scene = load_scene(&args.scene)?;
    let (lo, hi) = scene.geometry.mesh.bounds();
    let probe = args.probe.unwrap_or((lo + hi) * 0.5);
    if args.view.length() == 0.0 {
        return Err(Error::InvalidInput("--view must be nonzero".into()));
    }
    let config = HarnessConfig {
        sh_order: args.sh_order,
        sh_samples: args.sh_samples,
        sg: SgConfig {
            lobes: args.sg_lobes,
            samples: args.sg_samples,
            steps: args.sg_steps,
            seed: ctx.seed,
            ..SgConfig::default()
        },
        sphere: SphereConfig {
            resolution: args.resolution,
            samples: args.samples,
            seed: ctx.seed,
        },
    };
    let tbl = TblLight::new(&scene.geometry, &scene.emissive);
    let out = manifest.time("harness", || sphere_harness(&tbl, probe, args.view, &config))?;
    for (material, rep, img) in &out.images {
        let stem = format!("sphere_{}_{}", material.name(), rep.name());
        write_pfm(img, args.out.join(format!("{stem}.pfm")))?;
        write_ppm_preview(img, args.out.join(format!("{stem}.ppm")))?;
        manifest.output(args.out.join(format!("{stem}.pfm")));
        manifest.output(args.out.join(format!("{stem}.ppm")));
    }
    for (name, value) in [
        ("report.json", serde_json::to_value(&out.report)),
        ("sh.json", serde_json::to_value(&out.sh)),
        ("sg.json", serde_json::to_value(&out.sg)),
    ] {
        let value = value.map_err(|e| Error::Schema(e.to_string()))?;
        write_json(&args.out.join(name), &value)?;
        manifest.output(args.out.join(name));
    }
    println!("{:<14} {:<4} {:>10} {:>8}", "material", "rep", "MAE", "SSIM");
    for s in &out.report.scores {
        println!("{:<14} {:<4} {:>10.5} {:>8.4}", s.material.name(), s.representation.name(), s.mae, s.ssim);
    }
    manifest.write(&args.out)
}
