//! Binary bounding-volume hierarchy over mesh triangles.

use glam::DVec3;

use super::mesh::TriangleMesh;
use super::ray::{intersect_triangle, Hit, Ray};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Aabb {
    min: DVec3,
    max: DVec3,
}

impl Aabb {
    const EMPTY: Aabb = Aabb {
        min: DVec3::splat(f64::INFINITY),
        max: DVec3::splat(f64::NEG_INFINITY),
    };

    fn grow(self, p: DVec3) -> Aabb {
        Aabb {
            min: self.min.min(p),
            max: self.max.max(p),
        }
    }

    fn union(self, o: Aabb) -> Aabb {
        Aabb {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    /// Slab test; returns the entry distance when the box overlaps `[t_min, t_max]`.
    fn hit(&self, origin: DVec3, inv_dir: DVec3, t_min: f64, t_max: f64) -> Option<f64> {
        let t0 = (self.min - origin) * inv_dir;
        let t1 = (self.max - origin) * inv_dir;
        let lo = t0.min(t1);
        let hi = t0.max(t1);
        // NaN from 0·inf compares false and is ignored by max/min
        let enter = lo.x.max(lo.y).max(lo.z).max(t_min);
        let exit = hi.x.min(hi.y).min(hi.z).min(t_max);
        // slack keeps rays that graze a flat box (zero extent along one axis)
        if enter <= exit * (1.0 + 1e-12) + 1e-12 {
            Some(enter)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf { bounds: Aabb, first: usize, count: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Median-split BVH. Construction is deterministic for a given mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::InvalidInput("cannot build a BVH over an empty mesh".into()));
        }
        let boxes: Vec<Aabb> = (0..mesh.triangle_count())
            .map(|t| mesh.vertices(t).iter().fold(Aabb::EMPTY, |b, &p| b.grow(p)))
            .collect();
        let centroids: Vec<DVec3> = boxes.iter().map(|b| (b.min + b.max) * 0.5).collect();
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * mesh.triangle_count() / LEAF_SIZE + 1),
            order: (0..mesh.triangle_count()).collect(),
        };
        let n = bvh.order.len();
        bvh.build_node(&boxes, &centroids, 0, n);
        Ok(bvh)
    }

    fn build_node(&mut self, boxes: &[Aabb], centroids: &[DVec3], first: usize, end: usize) -> usize {
        let bounds = self.order[first..end]
            .iter()
            .fold(Aabb::EMPTY, |b, &t| b.union(boxes[t]));
        let index = self.nodes.len();
        let count = end - first;
        if count <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, first, count });
            return index;
        }
        let cb = self.order[first..end]
            .iter()
            .fold(Aabb::EMPTY, |b, &t| b.grow(centroids[t]));
        let extent = cb.max - cb.min;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        self.order[first..end].sort_by(|&a, &b| {
            centroids[a][axis]
                .total_cmp(&centroids[b][axis])
                .then(a.cmp(&b))
        });
        let mid = first + count / 2;
        // placeholder, patched once both children exist
        self.nodes.push(Node::Leaf { bounds, first, count });
        let left = self.build_node(boxes, centroids, first, mid);
        let right = self.build_node(boxes, centroids, mid, end);
        self.nodes[index] = Node::Inner { bounds, left, right };
        index
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Triangle ids per leaf, in storage order.
    pub fn leaves(&self) -> Vec<Vec<usize>> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { first, count, .. } => Some(self.order[*first..*first + *count].to_vec()),
                Node::Inner { .. } => None,
            })
            .collect()
    }

    /// Nearest hit with `t` strictly inside `(t_min, t_max)`; equal distances resolve to the
    /// lower triangle id.
    pub fn intersect(&self, mesh: &TriangleMesh, ray: &Ray) -> Option<Hit> {
        let inv_dir = ray.direction.recip();
        let mut best: Option<(f64, usize, f64, f64)> = None;
        let mut t_max = ray.t_max;
        let mut stack = [0usize; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp]];
            if node.bounds().hit(ray.origin, inv_dir, ray.t_min, t_max).is_none() {
                continue;
            }
            match *node {
                Node::Leaf { first, count, .. } => {
                    for &tri in &self.order[first..first + count] {
                        let probe = Ray { t_max: t_max * (1.0 + 1e-12) + 1e-300, ..*ray };
                        if let Some((t, b1, b2)) = intersect_triangle(&probe, mesh.vertices(tri)) {
                            let better = match best {
                                None => true,
                                Some((bt, btri, _, _)) => t < bt || (t == bt && tri < btri),
                            };
                            if better && t < ray.t_max {
                                best = Some((t, tri, b1, b2));
                                t_max = t;
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack[sp] = right;
                    stack[sp + 1] = left;
                    sp += 2;
                }
            }
        }
        best.map(|(t, triangle, b1, b2)| make_hit(mesh, t, triangle, b1, b2))
    }
}

pub(crate) fn make_hit(mesh: &TriangleMesh, t: f64, triangle: usize, b1: f64, b2: f64) -> Hit {
    let bary = [1.0 - b1 - b2, b1, b2];
    let (position, normal, uv) = mesh.interpolate(triangle, bary);
    Hit {
        t,
        triangle,
        bary,
        position,
        normal,
        geometric_normal: mesh.geometric_normal(triangle),
        uv,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use glam::DVec2;

    fn quad_z(z: f64) -> (Vec<DVec3>, Vec<[u32; 3]>) {
        (
            vec![
                DVec3::new(-1.0, -1.0, z),
                DVec3::new(1.0, -1.0, z),
                DVec3::new(1.0, 1.0, z),
                DVec3::new(-1.0, 1.0, z),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
    }

    #[test]
    fn single_triangle_is_one_leaf() {
        let mesh = TriangleMesh::new(vec![DVec3::ZERO, DVec3::X, DVec3::Y], None, None, vec![[0, 1, 2]]).unwrap();
        let bvh = Bvh::build(&mesh).unwrap();
        assert_eq!(bvh.node_count(), 1);
        assert_eq!(bvh.leaves(), vec![vec![0]]);
    }

    #[test]
    fn empty_mesh_is_an_error() {
        let mesh = TriangleMesh::new(vec![], None, None, vec![]).unwrap();
        assert!(Bvh::build(&mesh).is_err());
    }

    #[test]
    fn analytic_plane_hit() {
        let (p, t) = quad_z(0.0);
        let mesh = TriangleMesh::new(p, None, None, t).unwrap();
        let bvh = Bvh::build(&mesh).unwrap();
        let ray = Ray::new(DVec3::new(0.0, 0.0, 1.0), -DVec3::Z, 0.0, f64::INFINITY);
        let hit = bvh.intersect(&mesh, &ray).unwrap();
        assert!((hit.t - 1.0).abs() < 1e-12);
        assert!((hit.bary.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(hit.position.length() < 1e-12);
    }

    #[test]
    fn parallel_ray_misses() {
        let (p, t) = quad_z(0.0);
        let mesh = TriangleMesh::new(p, None, None, t).unwrap();
        let bvh = Bvh::build(&mesh).unwrap();
        let ray = Ray::new(DVec3::new(-2.0, 0.0, 0.0), DVec3::X, 0.0, f64::INFINITY);
        assert!(bvh.intersect(&mesh, &ray).is_none());
    }

    #[test]
    fn nearest_of_stacked_triangles() {
        let (mut p, mut t) = quad_z(-1.0);
        let (p2, t2) = quad_z(0.0);
        t.extend(t2.iter().map(|tri| tri.map(|i| i + 4)));
        p.extend(p2);
        let uv = vec![DVec2::ZERO; p.len()];
        let mesh = TriangleMesh::new(p, None, Some(uv), t).unwrap();
        let bvh = Bvh::build(&mesh).unwrap();
        let ray = Ray::new(DVec3::new(0.3, 0.2, 1.0), -DVec3::Z, 0.0, f64::INFINITY);
        let hit = bvh.intersect(&mesh, &ray).unwrap();
        assert!((hit.t - 1.0).abs() < 1e-12);
        assert!(hit.triangle >= 2);
    }

    #[test]
    fn t_range_is_exclusive() {
        let (p, t) = quad_z(0.0);
        let mesh = TriangleMesh::new(p, None, None, t).unwrap();
        let bvh = Bvh::build(&mesh).unwrap();
        let ray = Ray::new(DVec3::new(0.1, 0.1, 1.0), -DVec3::Z, 0.0, 1.0);
        assert!(bvh.intersect(&mesh, &ray).is_none());
    }
}
