//! Procedural scenes made of axis-aligned quads, each owning one chart of a grid UV atlas.
//!
//! Used by the test suites, the benchmarks and the `synth` command that writes the bundled
//! three-room scene.

use std::f64::consts::PI;

use glam::{DVec2, DVec3};
use serde::{Deserialize, Serialize};

use crate::assets::{AtlasConfig, MaskImage, Scene, TextureImage};
use crate::error::Result;
use crate::geometry::{Camera, Projection, SceneGeometry, TriangleMesh};
use crate::irradiance::bake_irt;
use crate::renderer::{render, RenderConfig, ShadingInputs};
use crate::sampling::mix_seed;
use crate::tbl::TblLight;

/// A planar rectangle; its front side faces `u_axis × v_axis`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quad {
    pub center: DVec3,
    pub u_axis: DVec3,
    pub v_axis: DVec3,
    pub half_u: f64,
    pub half_v: f64,
    pub class_id: u32,
    pub room: u32,
}

impl Quad {
    pub fn normal(&self) -> DVec3 {
        self.u_axis.cross(self.v_axis).normalize()
    }

    pub fn corners(&self) -> [DVec3; 4] {
        let (u, v) = (self.u_axis * self.half_u, self.v_axis * self.half_v);
        [
            self.center - u - v,
            self.center + u - v,
            self.center + u + v,
            self.center - u + v,
        ]
    }

    /// World point at chart-local coordinates `(s, t) ∈ [0,1]²`.
    pub fn point(&self, st: DVec2) -> DVec3 {
        self.center + self.u_axis * self.half_u * (2.0 * st.x - 1.0) + self.v_axis * self.half_v * (2.0 * st.y - 1.0)
    }
}

/// Inward-facing walls, floor and ceiling of the box `[lo, hi]` (y up).
///
/// Order: floor, ceiling, -x wall, +x wall, -z wall, +z wall. Classes: floor 1, walls 2,
/// ceiling 3.
pub fn box_room(lo: DVec3, hi: DVec3, room: u32) -> Vec<Quad> {
    let c = (lo + hi) * 0.5;
    let h = (hi - lo) * 0.5;
    let q = |center, u_axis, v_axis, half_u, half_v, class_id| Quad {
        center,
        u_axis,
        v_axis,
        half_u,
        half_v,
        class_id,
        room,
    };
    vec![
        q(DVec3::new(c.x, lo.y, c.z), DVec3::Z, DVec3::X, h.z, h.x, 1),
        q(DVec3::new(c.x, hi.y, c.z), DVec3::X, DVec3::Z, h.x, h.z, 3),
        q(DVec3::new(lo.x, c.y, c.z), DVec3::Y, DVec3::Z, h.y, h.z, 2),
        q(DVec3::new(hi.x, c.y, c.z), DVec3::Z, DVec3::Y, h.z, h.y, 2),
        q(DVec3::new(c.x, c.y, lo.z), DVec3::X, DVec3::Y, h.x, h.y, 2),
        q(DVec3::new(c.x, c.y, hi.z), DVec3::Y, DVec3::X, h.y, h.x, 2),
    ]
}

/// Quads packed into an `n × n` grid atlas, each chart inset from its cell.
#[derive(Clone, Debug)]
pub struct ChartScene {
    pub quads: Vec<Quad>,
    pub geometry: SceneGeometry,
    grid: usize,
    inset: f64,
}

impl ChartScene {
    /// `inset` is the chart margin inside each cell, as a fraction of the cell size.
    pub fn new(quads: Vec<Quad>, inset: f64) -> Result<Self> {
        let grid = (quads.len() as f64).sqrt().ceil().max(1.0) as usize;
        let mut positions = Vec::new();
        let mut normals = Vec::new();
        let mut uvs = Vec::new();
        let mut triangles = Vec::new();
        for (i, q) in quads.iter().enumerate() {
            let (lo, hi) = chart_rect(i, grid, inset);
            let base = positions.len() as u32;
            let corners_uv = [
                DVec2::new(lo.x, lo.y),
                DVec2::new(hi.x, lo.y),
                DVec2::new(hi.x, hi.y),
                DVec2::new(lo.x, hi.y),
            ];
            for (p, uv) in q.corners().into_iter().zip(corners_uv) {
                positions.push(p);
                normals.push(q.normal());
                uvs.push(uv);
            }
            triangles.push([base, base + 1, base + 2]);
            triangles.push([base, base + 2, base + 3]);
        }
        let mesh = TriangleMesh::new(positions, Some(normals), Some(uvs), triangles)?;
        Ok(ChartScene {
            quads,
            geometry: SceneGeometry::new(mesh)?,
            grid,
            inset,
        })
    }

    /// Chart owning atlas position `uv` and the chart-local coordinates, clamped to the chart.
    pub fn locate(&self, uv: DVec2) -> Option<(usize, DVec2)> {
        let cx = ((uv.x * self.grid as f64).floor().max(0.0) as usize).min(self.grid - 1);
        let cy = ((uv.y * self.grid as f64).floor().max(0.0) as usize).min(self.grid - 1);
        let chart = cy * self.grid + cx;
        if chart >= self.quads.len() {
            return None;
        }
        let (lo, hi) = chart_rect(chart, self.grid, self.inset);
        let st = ((uv - lo) / (hi - lo)).clamp(DVec2::ZERO, DVec2::ONE);
        Some((chart, st))
    }

    /// Texture whose texels take `f(quad, local st)`. Texels in empty cells repeat the chart
    /// below them so that bilinear lookups near chart borders never blend in padding.
    pub fn texture(&self, res: usize, channels: usize, f: impl Fn(&Quad, DVec2) -> DVec3) -> TextureImage {
        let mut img = TextureImage::new(res, res, channels);
        for i in 0..res * res {
            let mut uv = img.texel_center(i);
            while self.locate(uv).is_none() && uv.y > 0.0 {
                uv.y -= 1.0 / self.grid as f64;
            }
            if let Some((chart, st)) = self.locate(uv) {
                img.set_rgb(i, f(&self.quads[chart], st));
            }
        }
        img
    }

    pub fn mask(&self, res: usize, f: impl Fn(&Quad, DVec2) -> u32) -> MaskImage {
        let mut m = MaskImage::new(res, res);
        for y in 0..res {
            for x in 0..res {
                let uv = crate::assets::texel_center(x, y, res, res);
                if let Some((chart, st)) = self.locate(uv) {
                    m.set_texel(x, y, f(&self.quads[chart], st));
                }
            }
        }
        m
    }
}

fn chart_rect(i: usize, grid: usize, inset: f64) -> (DVec2, DVec2) {
    let cell = 1.0 / grid as f64;
    let lo = DVec2::new((i % grid) as f64, (i / grid) as f64) * cell;
    (lo + DVec2::splat(inset * cell), lo + DVec2::splat((1.0 - inset) * cell))
}

/// Closed box `[0, size]³` with per-face constant emission given by `face_values`
/// (order as in [`box_room`]).
pub fn emissive_box(size: f64, res: usize, face_values: [DVec3; 6]) -> Result<(ChartScene, TextureImage)> {
    let quads = box_room(DVec3::ZERO, DVec3::splat(size), 1);
    let scene = ChartScene::new(quads, 0.1)?;
    let tex = scene.texture(res, 3, |q, _| {
        let face = scene.quads.iter().position(|o| o == q).unwrap_or(0);
        face_values[face]
    });
    Ok((scene, tex))
}

/// Shared wall between the two rooms of [`two_rooms`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Partition {
    /// Full-height, full-width wall.
    Sealed,
    /// Full-height opening of the given width (meters) centered in the wall.
    Doorway(f64),
    /// No wall at all.
    Removed,
}

/// Two 3 × 2.5 × 3 m rooms side by side along x, separated at x = 3 by `partition`.
pub fn two_rooms(partition: Partition) -> Vec<Quad> {
    let mut quads = box_room(DVec3::ZERO, DVec3::new(3.0, 2.5, 3.0), 1);
    quads.extend(box_room(DVec3::new(3.0, 0.0, 0.0), DVec3::new(6.0, 2.5, 3.0), 2));
    quads.retain(|q| !((q.center.x - 3.0).abs() < 1e-9 && q.normal().x.abs() > 0.5));
    let wall = |z0: f64, z1: f64| Quad {
        center: DVec3::new(3.0, 1.25, (z0 + z1) / 2.0),
        u_axis: DVec3::Y,
        v_axis: DVec3::Z,
        half_u: 1.25,
        half_v: (z1 - z0) / 2.0,
        class_id: 2,
        room: 0,
    };
    match partition {
        Partition::Sealed => quads.push(wall(0.0, 3.0)),
        Partition::Doorway(width) => {
            let (d0, d1) = (1.5 - width / 2.0, 1.5 + width / 2.0);
            quads.push(wall(0.0, d0));
            quads.push(wall(d1, 3.0));
        }
        Partition::Removed => {}
    }
    quads
}

/// Ground-truth materials of one (room, class) pair of the three-room scene.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub albedo: DVec3,
    pub roughness: f64,
}

/// Rooms of the three-room scene are `ROOM_SIZE` boxes spaced `ROOM_PITCH` apart along x.
pub const ROOM_SIZE: DVec3 = DVec3::new(3.0, 2.5, 3.0);
pub const ROOM_PITCH: f64 = 3.1;

/// Materials indexed by `[room − 1][class − 1]` (floor, walls, ceiling).
pub const THREE_ROOM_MATERIALS: [[Material; 3]; 3] = [
    [
        Material { albedo: DVec3::new(0.30, 0.22, 0.15), roughness: 0.25 },
        Material { albedo: DVec3::new(0.75, 0.72, 0.65), roughness: 0.80 },
        Material { albedo: DVec3::new(0.85, 0.85, 0.85), roughness: 0.90 },
    ],
    [
        Material { albedo: DVec3::new(0.28, 0.30, 0.34), roughness: 0.40 },
        Material { albedo: DVec3::new(0.60, 0.70, 0.75), roughness: 0.70 },
        Material { albedo: DVec3::new(0.80, 0.80, 0.78), roughness: 0.90 },
    ],
    [
        Material { albedo: DVec3::new(0.45, 0.28, 0.22), roughness: 0.55 },
        Material { albedo: DVec3::new(0.70, 0.62, 0.50), roughness: 0.85 },
        Material { albedo: DVec3::new(0.82, 0.84, 0.86), roughness: 0.90 },
    ],
];

/// Radiance of the square ceiling panel of every room (half size 0.2 of the ceiling).
pub const PANEL_RADIANCE: f64 = 5.0;
const PANEL_HALF: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub image_width: usize,
    pub image_height: usize,
    pub material_res: usize,
    pub emissive_res: usize,
    pub irt_res: usize,
    /// GGX samples per pixel of the input renders.
    pub render_samples: usize,
    /// Samples per texel of the irradiance bake.
    pub bake_samples: usize,
    /// Diffuse interreflection bounces folded into the emissive (TBL) texture.
    pub bounces: usize,
    pub bounce_samples: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            image_width: 128,
            image_height: 96,
            material_res: 64,
            emissive_res: 128,
            irt_res: 64,
            render_samples: 512,
            bake_samples: 2048,
            bounces: 3,
            bounce_samples: 256,
            seed: 0,
        }
    }
}

/// A generated scene together with its ground-truth textures.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    /// Inputs only: images, cameras, emission, semantics and baked irradiance.
    pub scene: Scene,
    pub albedo: TextureImage,
    pub roughness: TextureImage,
    pub charts: ChartScene,
}

fn material(q: &Quad) -> Material {
    THREE_ROOM_MATERIALS[(q.room - 1) as usize][(q.class_id - 1) as usize]
}

fn is_panel(q: &Quad, st: DVec2) -> bool {
    q.class_id == 3 && (st - DVec2::splat(0.5)).abs().max_element() < PANEL_HALF
}

/// Eight pinhole views: three in rooms 1 and 2, two in room 3. Most look down across the
/// floor so the panel's mirror image is in frame.
pub fn three_room_cameras(width: usize, height: usize) -> Vec<Camera> {
    let pin = Projection::Pinhole { fov_deg: 90.0 };
    let at = |room: usize, p: [f64; 3], t: [f64; 3]| {
        let o = DVec3::new(room as f64 * ROOM_PITCH, 0.0, 0.0);
        Camera::look_at(pin, width, height, o + DVec3::from(p), o + DVec3::from(t))
    };
    vec![
        at(0, [0.4, 1.6, 0.4], [1.6, 0.0, 1.6]),
        at(0, [2.6, 1.5, 2.6], [1.2, 0.4, 1.2]),
        at(0, [1.5, 0.8, 0.3], [1.5, 2.5, 2.2]),
        at(1, [2.6, 1.6, 0.4], [1.4, 0.0, 1.6]),
        at(1, [0.4, 1.5, 2.6], [1.8, 0.4, 1.2]),
        at(1, [1.5, 0.8, 2.7], [1.5, 2.5, 0.8]),
        at(2, [0.4, 1.6, 2.6], [1.6, 0.0, 1.4]),
        at(2, [2.6, 1.2, 0.4], [0.6, 1.2, 2.4]),
    ]
}

/// The bundled scene: three closed rooms, each lit by a ceiling panel, with per-room
/// constant materials, a radiosity-solved emissive texture and GGX renders as inputs.
pub fn three_room_scene(config: &SynthConfig) -> Result<SyntheticScene> {
    let quads: Vec<Quad> = (0..3)
        .flat_map(|r| {
            let lo = DVec3::new(r as f64 * ROOM_PITCH, 0.0, 0.0);
            box_room(lo, lo + ROOM_SIZE, r as u32 + 1)
        })
        .collect();
    let charts = ChartScene::new(quads, 0.1)?;
    let er = config.emissive_res;
    let emission = charts.texture(er, 3, |q, st| {
        if is_panel(q, st) {
            DVec3::splat(PANEL_RADIANCE)
        } else {
            DVec3::ZERO
        }
    });
    let bounce_albedo = charts.texture(er, 3, |q, _| material(q).albedo);

    // Radiosity: L = Le + A/π · E[L], iterated from L = Le.
    let mut radiance = emission.clone();
    for b in 0..config.bounces {
        let tbl = TblLight::new(&charts.geometry, &radiance);
        let e = bake_irt(&tbl, er, config.bounce_samples, mix_seed(&[config.seed, 0xB0, b as u64]))?;
        let mut next = emission.clone();
        for i in 0..next.pixel_count() {
            let v = next.rgb(i) + bounce_albedo.rgb(i) * e.texture.rgb(i) / PI;
            next.set_rgb(i, v);
        }
        radiance = next;
    }

    let albedo = charts.texture(config.material_res, 3, |q, _| material(q).albedo);
    let roughness = charts.texture(config.material_res, 1, |q, _| DVec3::splat(material(q).roughness));
    let semantic = charts.mask(config.material_res, |q, _| q.class_id);
    let tbl = TblLight::new(&charts.geometry, &radiance);
    let irt = bake_irt(&tbl, config.irt_res, config.bake_samples, config.seed)?;
    let cameras = three_room_cameras(config.image_width, config.image_height);
    let inputs = ShadingInputs {
        tbl,
        albedo: &albedo,
        roughness: &roughness,
        irradiance: &irt,
        semantic: Some(&semantic),
    };
    let render_cfg = RenderConfig {
        samples: config.render_samples,
        seed: mix_seed(&[config.seed, 0x1A]),
        ..RenderConfig::default()
    };
    let images = cameras.iter().map(|c| render(&inputs, c, &render_cfg).image).collect();
    let scene = Scene {
        geometry: charts.geometry.clone(),
        emissive: radiance,
        semantic: Some(semantic),
        cameras,
        images,
        albedo: None,
        roughness: None,
        irradiance: Some(irt.texture),
        atlas: AtlasConfig {
            albedo_res: config.material_res,
            roughness_res: config.material_res,
            irt_res: config.irt_res,
        },
    };
    scene.validate()?;
    Ok(SyntheticScene {
        scene,
        albedo,
        roughness,
        charts,
    })
}
