use glam::{DVec2, DVec3};

#[derive(Clone, Copy, Debug)]
pub struct Ray {
    pub origin: DVec3,
    pub direction: DVec3,
    pub t_min: f64,
    pub t_max: f64,
}

impl Ray {
    pub fn new(origin: DVec3, direction: DVec3, t_min: f64, t_max: f64) -> Self {
        debug_assert!((direction.length() - 1.0).abs() < 1e-6, "ray direction must be unit");
        debug_assert!(0.0 <= t_min && t_min < t_max);
        Ray {
            origin,
            direction,
            t_min,
            t_max,
        }
    }

    pub fn at(&self, t: f64) -> DVec3 {
        self.origin + self.direction * t
    }
}

/// Nearest intersection along a ray with interpolated surface attributes.
#[derive(Clone, Copy, Debug)]
pub struct Hit {
    pub t: f64,
    pub triangle: usize,
    pub bary: [f64; 3],
    pub position: DVec3,
    /// Interpolated vertex normal, unit length, not yet oriented toward the ray.
    pub normal: DVec3,
    pub geometric_normal: DVec3,
    pub uv: DVec2,
}

/// Möller-Trumbore; returns `(t, b1, b2)` with closed edges, or `None` for parallel rays.
pub fn intersect_triangle(ray: &Ray, v: [DVec3; 3]) -> Option<(f64, f64, f64)> {
    let e1 = v[1] - v[0];
    let e2 = v[2] - v[0];
    let p = ray.direction.cross(e2);
    let det = e1.dot(p);
    let scale = e1.length() * e2.length();
    if det.abs() <= 1e-12 * scale {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - v[0];
    let b1 = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&b1) {
        return None;
    }
    let q = s.cross(e1);
    let b2 = ray.direction.dot(q) * inv;
    if b2 < 0.0 || b1 + b2 > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv;
    if t > ray.t_min && t < ray.t_max {
        Some((t, b1, b2))
    } else {
        None
    }
}
