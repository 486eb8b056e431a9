use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use texir_core::assets::{load_obj, write_atomic, write_mask_pgm};
use texir_core::irradiance::IrradianceTexture;
use texir_core::segmentation::{compute_rooms, detect_vhl, RoomParams, VhlConfig};
use texir_core::tbl::TblLight;
use texir_core::{load_scene, Error, MaskImage, Result, TextureImage, TriangleMesh};

use crate::output::{prepare_out, Manifest};
use crate::Ctx;

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::Schema(e.to_string()))?;
    write_atomic(path, json.as_bytes())
}

#[derive(Args, Debug, Serialize)]
pub struct RoomsArgs {
    /// Scene description, or a bare OBJ mesh with texture coordinates.
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Occupancy cell size in meters.
    #[arg(long, default_value_t = 0.1)]
    pub cell_size: f64,
    /// Bottom of the wall slice (meters, y up).
    #[arg(long, default_value_t = 0.5)]
    pub y_min: f64,
    /// Top of the wall slice.
    #[arg(long, default_value_t = 1.5)]
    pub y_max: f64,
    /// Resolution of the texture-space room mask.
    #[arg(long, default_value_t = 256)]
    pub res: usize,
}

#[derive(Serialize)]
struct RoomsReport {
    room_count: u32,
    nx: usize,
    nz: usize,
    origin: [f64; 2],
    cell_size: f64,
    /// Free cells per room id.
    cells: BTreeMap<u32, usize>,
}

fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj")) {
        load_obj(path, true)
    } else {
        Ok(load_scene(path)?.geometry.mesh)
    }
}

/// Writes `rooms.pgm` (room id per texel), `rooms_grid.pgm` (room id per cell, 0 occupied;
/// row k is the k-th z slab) and `rooms.json`.
pub fn run_rooms(ctx: &Ctx, args: RoomsArgs) -> Result<()> {
    prepare_out(&args.out, &[&args.input])?;
    let mut manifest = Manifest::new("rooms", ctx, Some(&args.input), &args);
    let mesh = load_mesh(&args.input)?;
    let params = RoomParams {
        cell_size: args.cell_size,
        y_min: args.y_min,
        y_max: args.y_max,
    };
    let map = manifest.time("rooms", || compute_rooms(&mesh, &params, args.res))?;
    let g = &map.grid;
    let texels = args.out.join("rooms.pgm");
    write_mask_pgm(&map.texels, &texels)?;
    let grid = args.out.join("rooms_grid.pgm");
    write_mask_pgm(&MaskImage::from_ids(g.nx, g.nz, map.cell_rooms.clone())?, &grid)?;
    let mut cells = BTreeMap::new();
    for &id in map.cell_rooms.iter().filter(|&&id| id != 0) {
        *cells.entry(id).or_insert(0) += 1;
    }
    let report = RoomsReport {
        room_count: map.room_count,
        nx: g.nx,
        nz: g.nz,
        origin: g.origin.to_array(),
        cell_size: g.cell_size,
        cells,
    };
    let json = args.out.join("rooms.json");
    write_json(&json, &report)?;
    println!("{} rooms", map.room_count);
    manifest.output(texels);
    manifest.output(grid);
    manifest.output(json);
    manifest.write(&args.out)
}

#[derive(Args, Debug, Serialize)]
pub struct VhlArgs {
    /// Scene with a semantic mask and a baked irradiance texture.
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Albedo used for the diffuse reference (default: the scene's, else uniform 0.5).
    #[arg(long)]
    pub albedo: Option<PathBuf>,
    /// Probe roughness of the highlight renders.
    #[arg(long, default_value_t = 0.01)]
    pub roughness: f64,
    /// GGX samples per pixel.
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    /// Absolute specular luminance threshold.
    #[arg(long, default_value_t = 0.05)]
    pub tau_abs: f64,
    /// Threshold relative to the class median diffuse luminance.
    #[arg(long, default_value_t = 1.0)]
    pub tau_rel: f64,
    #[arg(long, default_value_t = 0.5)]
    pub emitter_threshold: f64,
}

#[derive(Serialize)]
struct VhlReport {
    /// Highlight pixels per view.
    views: Vec<usize>,
    /// Highlight pixels per class over all views.
    classes: BTreeMap<u32, usize>,
}

/// Writes `vhl_<view>.pgm` (1 on highlight pixels) and `vhl.json`.
pub fn run_vhl(ctx: &Ctx, args: VhlArgs) -> Result<()> {
    let inputs: Vec<&Path> = [Some(args.scene.as_path()), args.albedo.as_deref()].into_iter().flatten().collect();
    prepare_out(&args.out, &inputs)?;
    let mut manifest = Manifest::new("vhl", ctx, Some(&args.scene), &args);
    let scene = load_scene(&args.scene)?;
    let semantic = scene.semantic()?;
    let irt = scene
        .irradiance
        .clone()
        .ok_or_else(|| Error::InvalidInput("scene has no irradiance texture; run `bake` first".into()))?;
    let irt = IrradianceTexture::full(irt)?;
    let albedo = match (&args.albedo, &scene.albedo) {
        (Some(p), _) => texir_core::assets::read_pfm(p)?,
        (None, Some(a)) => a.clone(),
        (None, None) => TextureImage::filled(1, 1, &[0.5; 3]),
    };
    let config = VhlConfig {
        roughness: args.roughness,
        samples: args.samples,
        tau_abs: args.tau_abs,
        tau_rel: args.tau_rel,
        seed: ctx.seed,
        emitter_threshold: args.emitter_threshold,
    };
    let tbl = TblLight::new(&scene.geometry, &scene.emissive);
    let masks = manifest.time("vhl", || {
        detect_vhl(&scene.geometry, &tbl, &scene.cameras, semantic, &albedo, &irt, &config)
    });
    let mut report = VhlReport {
        views: Vec::new(),
        classes: BTreeMap::new(),
    };
    for (i, v) in masks.views.iter().enumerate() {
        let ids = v.highlight.iter().map(|&h| u32::from(h)).collect();
        let path = args.out.join(format!("vhl_{i:02}.pgm"));
        write_mask_pgm(&MaskImage::from_ids(v.width, v.height, ids)?, &path)?;
        manifest.output(path);
        report.views.push(v.count());
        for (&c, &h) in v.classes.iter().zip(&v.highlight) {
            if h {
                *report.classes.entry(c).or_insert(0) += 1;
            }
        }
    }
    let json = args.out.join("vhl.json");
    write_json(&json, &report)?;
    manifest.output(json);
    manifest.write(&args.out)
}
