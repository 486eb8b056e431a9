use std::f64::consts::PI;

use glam::{DMat3, DVec2, DVec3};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Projection {
    /// `fov_deg` is the horizontal field of view.
    Pinhole { fov_deg: f64 },
    Equirect,
}

/// A posed camera. `rotation` maps camera-frame directions to world directions and
/// `position` is the camera center in meters, so `x_world = rotation · x_cam + position`.
///
/// Camera frame: x right, y up, pinhole looks down -z. Pixel rows are indexed from the
/// bottom, matching image storage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub projection: Projection,
    pub width: usize,
    pub height: usize,
    pub rotation: DMat3,
    pub position: DVec3,
}

impl Camera {
    /// Pinhole or panorama camera at `position` looking toward `target` with `up` roughly +y.
    pub fn look_at(projection: Projection, width: usize, height: usize, position: DVec3, target: DVec3) -> Camera {
        let forward = (target - position).normalize();
        let up_hint = if forward.y.abs() > 0.999 { DVec3::Z } else { DVec3::Y };
        let right = forward.cross(up_hint).normalize();
        let up = right.cross(forward);
        Camera {
            projection,
            width,
            height,
            rotation: DMat3::from_cols(right, up, -forward),
            position,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Camera-frame direction through the center of pixel `(x, y)` (row `y` from the bottom).
    pub fn local_direction(&self, x: usize, y: usize) -> DVec3 {
        match self.projection {
            Projection::Pinhole { fov_deg } => {
                let tan = (fov_deg.to_radians() * 0.5).tan();
                let aspect = self.height as f64 / self.width as f64;
                let sx = (2.0 * (x as f64 + 0.5) / self.width as f64 - 1.0) * tan;
                let sy = (2.0 * (y as f64 + 0.5) / self.height as f64 - 1.0) * tan * aspect;
                DVec3::new(sx, sy, -1.0).normalize()
            }
            Projection::Equirect => {
                let row_from_top = self.height - 1 - y;
                let phi = 2.0 * PI * (x as f64 + 0.5) / self.width as f64;
                let theta = PI * (row_from_top as f64 + 0.5) / self.height as f64;
                DVec3::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin())
            }
        }
    }

    pub fn direction(&self, x: usize, y: usize) -> DVec3 {
        (self.rotation * self.local_direction(x, y)).normalize()
    }

    /// Image uv (bottom-up, `[0,1]²`) at which world point `p` appears, or `None` when it is
    /// outside the frame or behind a pinhole camera.
    pub fn project(&self, p: DVec3) -> Option<DVec2> {
        let d = self.rotation.transpose() * (p - self.position);
        match self.projection {
            Projection::Pinhole { fov_deg } => {
                if d.z >= 0.0 {
                    return None;
                }
                let tan = (fov_deg.to_radians() * 0.5).tan();
                let aspect = self.height as f64 / self.width as f64;
                let sx = d.x / -d.z / tan;
                let sy = d.y / -d.z / (tan * aspect);
                let uv = DVec2::new((sx + 1.0) * 0.5, (sy + 1.0) * 0.5);
                (uv.cmpge(DVec2::ZERO).all() && uv.cmple(DVec2::ONE).all()).then_some(uv)
            }
            Projection::Equirect => {
                let d = d.normalize_or_zero();
                if d == DVec3::ZERO {
                    return None;
                }
                let theta = d.y.clamp(-1.0, 1.0).acos();
                let phi = d.z.atan2(d.x).rem_euclid(2.0 * PI);
                Some(DVec2::new(phi / (2.0 * PI), 1.0 - theta / PI))
            }
        }
    }

    /// True when the rotation is orthonormal with determinant +1 within `tol`.
    pub fn rotation_is_orthonormal(&self, tol: f64) -> bool {
        let r = self.rotation;
        let rrt = r * r.transpose();
        let id = DMat3::IDENTITY;
        (0..3).all(|c| (rrt.col(c) - id.col(c)).abs().max_element() <= tol) && (r.determinant() - 1.0).abs() <= tol
    }
}
