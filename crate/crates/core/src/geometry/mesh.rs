use glam::{DVec2, DVec3};

use crate::error::{Error, Result};

/// Indexed triangle mesh with per-vertex position, unit normal and texture coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    positions: Vec<DVec3>,
    normals: Vec<DVec3>,
    uvs: Vec<DVec2>,
    triangles: Vec<[u32; 3]>,
    has_uvs: bool,
}

/// Triangles with twice-area below this are dropped at construction.
const DEGENERATE_AREA: f64 = 1e-14;

impl TriangleMesh {
    /// Validates indices, drops degenerate triangles, fills missing normals with
    /// area-weighted face normals and clamps UVs into `[0,1]²`.
    pub fn new(
        positions: Vec<DVec3>,
        normals: Option<Vec<DVec3>>,
        uvs: Option<Vec<DVec2>>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<Self> {
        let n = positions.len();
        if let Some(p) = positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!("vertex {p} has a non-finite position")));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&i) = tri.iter().find(|&&i| i as usize >= n) {
                return Err(Error::InvalidInput(format!(
                    "triangle {t} references vertex {i} but the mesh has {n}"
                )));
            }
        }
        let triangles: Vec<[u32; 3]> = triangles
            .into_iter()
            .filter(|t| {
                t[0] != t[1] && t[1] != t[2] && t[0] != t[2] && {
                    let [a, b, c] = t.map(|i| positions[i as usize]);
                    (b - a).cross(c - a).length() > DEGENERATE_AREA
                }
            })
            .collect();
        let has_uvs = uvs.is_some();
        let uvs = match uvs {
            Some(u) if u.len() == n => u.into_iter().map(|uv| uv.clamp(DVec2::ZERO, DVec2::ONE)).collect(),
            Some(u) => {
                return Err(Error::InvalidInput(format!("{} uvs for {n} vertices", u.len())));
            }
            None => vec![DVec2::ZERO; n],
        };
        let normals = match normals {
            Some(nr) if nr.len() == n => nr
                .into_iter()
                .map(|v| {
                    let v = v.normalize_or_zero();
                    if v == DVec3::ZERO {
                        DVec3::Y
                    } else {
                        v
                    }
                })
                .collect(),
            Some(nr) => {
                return Err(Error::InvalidInput(format!("{} normals for {n} vertices", nr.len())));
            }
            None => area_weighted_normals(&positions, &triangles),
        };
        Ok(TriangleMesh {
            positions,
            normals,
            uvs,
            triangles,
            has_uvs,
        })
    }

    pub fn positions(&self) -> &[DVec3] {
        &self.positions
    }

    pub fn normals(&self) -> &[DVec3] {
        &self.normals
    }

    pub fn uvs(&self) -> &[DVec2] {
        &self.uvs
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn has_uvs(&self) -> bool {
        self.has_uvs
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn vertices(&self, tri: usize) -> [DVec3; 3] {
        self.triangles[tri].map(|i| self.positions[i as usize])
    }

    pub fn triangle_uvs(&self, tri: usize) -> [DVec2; 3] {
        self.triangles[tri].map(|i| self.uvs[i as usize])
    }

    pub fn geometric_normal(&self, tri: usize) -> DVec3 {
        let [a, b, c] = self.vertices(tri);
        (b - a).cross(c - a).normalize()
    }

    pub fn bounds(&self) -> (DVec3, DVec3) {
        self.triangles
            .iter()
            .flat_map(|t| t.iter())
            .fold((DVec3::splat(f64::INFINITY), DVec3::splat(f64::NEG_INFINITY)), |(lo, hi), &i| {
                let p = self.positions[i as usize];
                (lo.min(p), hi.max(p))
            })
    }

    pub fn diagonal(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo).length()
    }

    /// Barycentric interpolation of position, unit normal and uv over triangle `tri`.
    pub fn interpolate(&self, tri: usize, bary: [f64; 3]) -> (DVec3, DVec3, DVec2) {
        let idx = self.triangles[tri].map(|i| i as usize);
        let mut p = DVec3::ZERO;
        let mut n = DVec3::ZERO;
        let mut uv = DVec2::ZERO;
        for k in 0..3 {
            p += self.positions[idx[k]] * bary[k];
            n += self.normals[idx[k]] * bary[k];
            uv += self.uvs[idx[k]] * bary[k];
        }
        let n = n.normalize_or_zero();
        let n = if n == DVec3::ZERO { self.geometric_normal(tri) } else { n };
        (p, n, uv)
    }

    /// Same triangles with vertex storage permuted; used to check order independence.
    pub fn with_vertex_order(&self, order: &[usize]) -> TriangleMesh {
        let mut inverse = vec![0u32; order.len()];
        for (new, &old) in order.iter().enumerate() {
            inverse[old] = new as u32;
        }
        TriangleMesh {
            positions: order.iter().map(|&i| self.positions[i]).collect(),
            normals: order.iter().map(|&i| self.normals[i]).collect(),
            uvs: order.iter().map(|&i| self.uvs[i]).collect(),
            triangles: self.triangles.iter().map(|t| t.map(|i| inverse[i as usize])).collect(),
            has_uvs: self.has_uvs,
        }
    }
}

fn area_weighted_normals(positions: &[DVec3], triangles: &[[u32; 3]]) -> Vec<DVec3> {
    let mut acc = vec![DVec3::ZERO; positions.len()];
    for t in triangles {
        let [a, b, c] = t.map(|i| positions[i as usize]);
        // the unnormalized cross product is already weighted by twice the area
        let n = (b - a).cross(c - a);
        for &i in t {
            acc[i as usize] += n;
        }
    }
    acc.into_iter()
        .map(|n| {
            let n = n.normalize_or_zero();
            if n == DVec3::ZERO {
                DVec3::Y
            } else {
                n
            }
        })
        .collect()
}
