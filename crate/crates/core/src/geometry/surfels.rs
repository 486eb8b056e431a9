//! Texel → surface sample mapping through the mesh's UV atlas.

use glam::{DVec2, DVec3};

use super::mesh::TriangleMesh;
use crate::assets::MaskImage;
use crate::error::{Error, Result};

/// Surface sample owned by one atlas texel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Surfel {
    pub texel: (usize, usize),
    pub triangle: usize,
    pub bary: [f64; 3],
    pub position: DVec3,
    pub normal: DVec3,
    /// Texture coordinate of the sample point (equals the texel center when it lies inside
    /// the owning triangle).
    pub uv: DVec2,
    pub class_id: u32,
    pub room_id: u32,
}

/// All surfels of an atlas resolution, plus the texel → surfel lookup.
#[derive(Clone, Debug)]
pub struct SurfelAtlas {
    pub width: usize,
    pub height: usize,
    pub surfels: Vec<Surfel>,
    owner: Vec<u32>,
}

const NONE: u32 = u32::MAX;

impl SurfelAtlas {
    pub fn surfel_at(&self, x: usize, y: usize) -> Option<&Surfel> {
        match self.owner[y * self.width + x] {
            NONE => None,
            i => Some(&self.surfels[i as usize]),
        }
    }

    pub fn is_covered(&self, index: usize) -> bool {
        self.owner[index] != NONE
    }

    /// 1 for covered texels, 0 elsewhere.
    pub fn coverage_mask(&self) -> MaskImage {
        let mut m = MaskImage::new(self.width, self.height);
        for s in &self.surfels {
            m.set_texel(s.texel.0, s.texel.1, 1);
        }
        m
    }

    /// Copies class ids (nearest-texel lookup at the surfel uv) from a texture-space mask.
    pub fn assign_classes(&mut self, semantic: &MaskImage) {
        for s in &mut self.surfels {
            s.class_id = semantic.at_uv(s.uv);
        }
    }
}

/// Conservatively rasterizes every triangle into a `width × height` atlas.
///
/// A texel is covered when its square overlaps a triangle with positive area. The sample
/// point is the texel center when the center lies inside the triangle, otherwise the
/// centroid of the texel/triangle overlap. Texels claimed by several triangles keep the
/// lowest triangle index.
pub fn texel_surfels(mesh: &TriangleMesh, width: usize, height: usize) -> Result<SurfelAtlas> {
    if !mesh.has_uvs() {
        return Err(Error::InvalidInput("mesh has no texture coordinates".into()));
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput("atlas resolution must be at least 1".into()));
    }
    let scale = DVec2::new(width as f64, height as f64);
    let mut owner = vec![NONE; width * height];
    let mut surfels = Vec::new();
    for tri in 0..mesh.triangle_count() {
        let t = mesh.triangle_uvs(tri).map(|uv| uv * scale);
        let area = signed_area(&t);
        if area.abs() < 1e-12 {
            // zero UV area: keep a single sample at the centroid
            let c = (t[0] + t[1] + t[2]) / 3.0;
            let x = (c.x.floor().max(0.0) as usize).min(width - 1);
            let y = (c.y.floor().max(0.0) as usize).min(height - 1);
            if owner[y * width + x] == NONE {
                owner[y * width + x] = surfels.len() as u32;
                surfels.push(make_surfel(mesh, tri, (x, y), [1.0 / 3.0; 3]));
            }
            continue;
        }
        let lo = t[0].min(t[1]).min(t[2]);
        let hi = t[0].max(t[1]).max(t[2]);
        let x0 = (lo.x.floor().max(0.0) as usize).min(width - 1);
        let y0 = (lo.y.floor().max(0.0) as usize).min(height - 1);
        let x1 = (hi.x.ceil().max(1.0) as usize).min(width);
        let y1 = (hi.y.ceil().max(1.0) as usize).min(height);
        for y in y0..y1 {
            for x in x0..x1 {
                let idx = y * width + x;
                if owner[idx] != NONE {
                    continue;
                }
                let center = DVec2::new(x as f64 + 0.5, y as f64 + 0.5);
                let b = barycentric(&t, area, center);
                let bary = if b.iter().all(|&v| v >= 0.0) {
                    b
                } else {
                    let poly = clip_to_square(&t, x as f64, y as f64);
                    if poly.len() < 3 || polygon_area(&poly).abs() < 1e-12 {
                        continue;
                    }
                    let c = poly.iter().copied().sum::<DVec2>() / poly.len() as f64;
                    let b = barycentric(&t, area, c).map(|v| v.max(0.0));
                    let s: f64 = b.iter().sum();
                    b.map(|v| v / s)
                };
                owner[idx] = surfels.len() as u32;
                surfels.push(make_surfel(mesh, tri, (x, y), bary));
            }
        }
    }
    Ok(SurfelAtlas {
        width,
        height,
        surfels,
        owner,
    })
}

fn make_surfel(mesh: &TriangleMesh, triangle: usize, texel: (usize, usize), bary: [f64; 3]) -> Surfel {
    let (position, normal, uv) = mesh.interpolate(triangle, bary);
    Surfel {
        texel,
        triangle,
        bary,
        position,
        normal,
        uv,
        class_id: 0,
        room_id: 0,
    }
}

fn signed_area(t: &[DVec2; 3]) -> f64 {
    0.5 * (t[1] - t[0]).perp_dot(t[2] - t[0])
}

fn barycentric(t: &[DVec2; 3], area: f64, p: DVec2) -> [f64; 3] {
    let b1 = 0.5 * (p - t[0]).perp_dot(t[2] - t[0]) / area;
    let b2 = 0.5 * (t[1] - t[0]).perp_dot(p - t[0]) / area;
    [1.0 - b1 - b2, b1, b2]
}

fn polygon_area(poly: &[DVec2]) -> f64 {
    let n = poly.len();
    0.5 * (0..n).map(|i| poly[i].perp_dot(poly[(i + 1) % n])).sum::<f64>()
}

/// Sutherland-Hodgman clip of a triangle against the unit texel square at `(x, y)`.
fn clip_to_square(t: &[DVec2; 3], x: f64, y: f64) -> Vec<DVec2> {
    let mut poly: Vec<DVec2> = t.to_vec();
    // (axis, bound, keep_greater)
    let planes = [(0, x, true), (0, x + 1.0, false), (1, y, true), (1, y + 1.0, false)];
    for (axis, bound, keep_greater) in planes {
        if poly.is_empty() {
            break;
        }
        let inside = |p: DVec2| if keep_greater { p[axis] >= bound } else { p[axis] <= bound };
        let mut out = Vec::with_capacity(poly.len() + 2);
        for i in 0..poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            match (inside(a), inside(b)) {
                (true, true) => out.push(b),
                (true, false) => out.push(cut(a, b, axis, bound)),
                (false, true) => {
                    out.push(cut(a, b, axis, bound));
                    out.push(b);
                }
                (false, false) => {}
            }
        }
        poly = out;
    }
    poly
}

fn cut(a: DVec2, b: DVec2, axis: usize, bound: f64) -> DVec2 {
    let s = (bound - a[axis]) / (b[axis] - a[axis]);
    let mut p = a + (b - a) * s;
    p[axis] = bound;
    p
}
