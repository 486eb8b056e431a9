//! Texture-based lighting: incident radiance read from an HDR texture on the scene mesh.

use glam::DVec3;
use rayon::prelude::*;

use crate::assets::{MaskImage, TextureImage};
use crate::error::{Error, Result};
use crate::geometry::{texel_surfels, Camera, Ray, SceneGeometry};

/// Incident radiance from anywhere in the scene: cast a ray, read the emissive texture at
/// the hit. Surfaces are treated as diffuse emitters of their texture value.
#[derive(Clone, Copy, Debug)]
pub struct TblLight<'a> {
    geometry: &'a SceneGeometry,
    emissive: &'a TextureImage,
    escape: DVec3,
}

impl<'a> TblLight<'a> {
    pub fn new(geometry: &'a SceneGeometry, emissive: &'a TextureImage) -> Self {
        TblLight {
            geometry,
            emissive,
            escape: DVec3::ZERO,
        }
    }

    /// Radiance returned by rays that leave the scene (default black).
    pub fn with_escape(mut self, escape: DVec3) -> Self {
        self.escape = escape;
        self
    }

    pub fn geometry(&self) -> &'a SceneGeometry {
        self.geometry
    }

    pub fn emissive(&self) -> &'a TextureImage {
        self.emissive
    }

    /// Radiance arriving at `x` from direction `omega` (pointing away from `x`).
    pub fn query_radiance(&self, x: DVec3, omega: DVec3) -> DVec3 {
        match self.geometry.trace_from(x, omega) {
            Some(hit) => self.emissive.sample(hit.uv),
            None => self.escape,
        }
    }
}

/// Coverage codes of a texture reconstructed from views.
pub const COVERAGE_NONE: u32 = 0;
pub const COVERAGE_SEEN: u32 = 1;
pub const COVERAGE_FILLED: u32 = 2;

const MAX_DILATION_ITERS: usize = 64;

#[derive(Clone, Debug)]
pub struct ViewBake {
    pub texture: TextureImage,
    /// [`COVERAGE_SEEN`], [`COVERAGE_FILLED`] or [`COVERAGE_NONE`] per texel.
    pub coverage: MaskImage,
}

/// Reconstructs the emissive texture from posed HDR images.
///
/// Each covered texel takes the bilinear image sample from the unoccluded camera that sees
/// it most frontally (ties go to the lower camera index). Texels seen by no camera are filled
/// by iterative 8-neighbor averaging.
pub fn build_tbl_from_views(
    geometry: &SceneGeometry,
    cameras: &[Camera],
    images: &[TextureImage],
    res: usize,
) -> Result<ViewBake> {
    if cameras.len() != images.len() {
        return Err(Error::InvalidInput(format!(
            "{} cameras but {} images",
            cameras.len(),
            images.len()
        )));
    }
    let atlas = texel_surfels(&geometry.mesh, res, res)?;
    let eps = geometry.ray_epsilon();
    let samples: Vec<Option<DVec3>> = atlas
        .surfels
        .par_iter()
        .map(|s| {
            let mut best: Option<(f64, usize, glam::DVec2)> = None;
            for (ci, cam) in cameras.iter().enumerate() {
                let Some(uv) = cam.project(s.position) else { continue };
                let to_cam = cam.position - s.position;
                let dist = to_cam.length();
                if dist <= eps {
                    continue;
                }
                let dir = to_cam / dist;
                let frontal = s.normal.dot(dir).abs();
                if frontal <= 1e-6 {
                    continue;
                }
                let ray = Ray::new(s.position, dir, eps, dist - eps);
                if geometry.intersect(&ray).is_some() {
                    continue;
                }
                if best.is_none_or(|(b, _, _)| frontal > b) {
                    best = Some((frontal, ci, uv));
                }
            }
            best.map(|(_, ci, uv)| images[ci].sample(uv))
        })
        .collect();

    if samples.iter().all(Option::is_none) {
        return Err(Error::InvalidInput("no camera sees any surface".into()));
    }
    let mut texture = TextureImage::new(res, res, 3);
    let mut coverage = MaskImage::new(res, res);
    for (s, value) in atlas.surfels.iter().zip(&samples) {
        if let Some(v) = value {
            let (x, y) = s.texel;
            texture.set_rgb(y * res + x, *v);
            coverage.set_texel(x, y, COVERAGE_SEEN);
        }
    }
    dilate(&mut texture, &mut coverage);
    Ok(ViewBake { texture, coverage })
}

/// Fills uncovered texels with the mean of their covered 8-neighbors, one ring per pass,
/// until nothing changes or the iteration cap is reached.
fn dilate(texture: &mut TextureImage, coverage: &mut MaskImage) {
    let (w, h) = (texture.width(), texture.height());
    for _ in 0..MAX_DILATION_ITERS {
        let mut updates = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if coverage.at_texel(x, y) != COVERAGE_NONE {
                    continue;
                }
                let mut sum = DVec3::ZERO;
                let mut n = 0;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if coverage.at_texel(nx, ny) != COVERAGE_NONE {
                            sum += texture.rgb(ny * w + nx);
                            n += 1;
                        }
                    }
                }
                if n > 0 {
                    updates.push((x, y, sum / n as f64));
                }
            }
        }
        if updates.is_empty() {
            break;
        }
        for (x, y, v) in updates {
            texture.set_rgb(y * w + x, v);
            coverage.set_texel(x, y, COVERAGE_FILLED);
        }
    }
}

/// Renders what a camera sees when every surface shows its emissive texture.
pub fn render_emission(tbl: &TblLight, camera: &Camera) -> TextureImage {
    let pixels: Vec<DVec3> = (0..camera.pixel_count())
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % camera.width, i / camera.width);
            let ray = Ray::new(camera.position, camera.direction(x, y), 0.0, f64::INFINITY);
            match tbl.geometry().intersect(&ray) {
                Some(hit) => tbl.emissive().sample(hit.uv),
                None => tbl.escape,
            }
        })
        .collect();
    let mut img = TextureImage::new(camera.width, camera.height, 3);
    for (i, p) in pixels.into_iter().enumerate() {
        img.set_rgb(i, p);
    }
    img
}
