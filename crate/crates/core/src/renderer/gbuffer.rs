use glam::{DVec2, DVec3};
use rayon::prelude::*;

use crate::assets::MaskImage;
use crate::geometry::{Camera, Ray, SceneGeometry};

/// Primary-ray hit of one pixel. Invalid pixels are all zeros.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GPixel {
    pub valid: bool,
    pub position: DVec3,
    /// Shading normal oriented toward the viewer's side of the surface.
    pub normal: DVec3,
    pub uv: DVec2,
    /// Unit vector from the surface toward the camera.
    pub view: DVec3,
    pub class_id: u32,
    pub room_id: u32,
    pub depth: f64,
}

/// Per-pixel surface attributes of one camera, rows bottom-up like the images.
#[derive(Clone, Debug, PartialEq)]
pub struct GBuffer {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<GPixel>,
}

impl GBuffer {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.pixels.iter().filter(|p| p.valid).count()
    }

    /// Class ids per pixel (0 for misses).
    pub fn class_image(&self) -> Vec<u32> {
        self.pixels.iter().map(|p| p.class_id).collect()
    }

    pub fn room_image(&self) -> Vec<u32> {
        self.pixels.iter().map(|p| p.room_id).collect()
    }
}

/// Casts one ray through every pixel center and records the interpolated hit attributes.
/// Class and room ids are nearest-texel lookups in the texture-space masks.
pub fn make_gbuffer(
    geometry: &SceneGeometry,
    camera: &Camera,
    semantic: Option<&MaskImage>,
    rooms: Option<&MaskImage>,
) -> GBuffer {
    let pixels = (0..camera.pixel_count())
        .into_par_iter()
        .map(|i| {
            let dir = camera.direction(i % camera.width, i / camera.width);
            let Some(hit) = geometry.intersect(&Ray::new(camera.position, dir, 0.0, f64::INFINITY)) else {
                return GPixel::default();
            };
            let view = -dir;
            let geometric = if hit.geometric_normal.dot(view) < 0.0 {
                -hit.geometric_normal
            } else {
                hit.geometric_normal
            };
            let normal = if hit.normal.dot(geometric) < 0.0 { -hit.normal } else { hit.normal };
            GPixel {
                valid: true,
                position: hit.position,
                normal,
                uv: hit.uv,
                view,
                class_id: semantic.map_or(0, |m| m.at_uv(hit.uv)),
                room_id: rooms.map_or(0, |m| m.at_uv(hit.uv)),
                depth: hit.t,
            }
        })
        .collect();
    GBuffer {
        width: camera.width,
        height: camera.height,
        pixels,
    }
}
