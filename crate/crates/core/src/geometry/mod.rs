//! Meshes, rays, the BVH and texel surfels.

mod bvh;
mod camera;
mod mesh;
mod ray;
mod surfels;

pub use bvh::Bvh;
pub use camera::{Camera, Projection};
pub use mesh::TriangleMesh;
pub use ray::{intersect_triangle, Hit, Ray};
pub use surfels::{texel_surfels, Surfel, SurfelAtlas};

use glam::DVec3;

use crate::error::Result;

/// A mesh together with its acceleration structure.
#[derive(Clone, Debug)]
pub struct SceneGeometry {
    pub mesh: TriangleMesh,
    pub bvh: Bvh,
    diagonal: f64,
}

impl SceneGeometry {
    pub fn new(mesh: TriangleMesh) -> Result<Self> {
        let bvh = Bvh::build(&mesh)?;
        let diagonal = mesh.diagonal();
        Ok(SceneGeometry { mesh, bvh, diagonal })
    }

    pub fn diagonal(&self) -> f64 {
        self.diagonal
    }

    /// Start offset for secondary rays: `1e-4 ×` the scene diagonal.
    pub fn ray_epsilon(&self) -> f64 {
        1e-4 * self.diagonal
    }

    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        self.bvh.intersect(&self.mesh, ray)
    }

    /// Secondary ray leaving a surface point.
    pub fn trace_from(&self, origin: DVec3, direction: DVec3) -> Option<Hit> {
        self.intersect(&Ray::new(origin, direction, self.ray_epsilon(), f64::INFINITY))
    }
}
