//! Room segmentation from a horizontal occupancy slice.

use std::collections::VecDeque;

use glam::{DVec2, DVec3};
use serde::{Deserialize, Serialize};

use crate::assets::MaskImage;
use crate::error::{Error, Result};
use crate::geometry::{texel_surfels, TriangleMesh};

/// Slice and cell size of the occupancy grid (meters, y up).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomParams {
    pub cell_size: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for RoomParams {
    fn default() -> Self {
        RoomParams {
            cell_size: 0.1,
            y_min: 0.5,
            y_max: 1.5,
        }
    }
}

/// Axis-aligned grid over the xz footprint of the mesh. Cell `(i, k)` covers
/// `origin + [i, i+1) × [k, k+1)` cells, stored row-major in `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    pub origin: DVec2,
    pub cell_size: f64,
    pub nx: usize,
    pub nz: usize,
    pub occupied: Vec<bool>,
}

impl OccupancyGrid {
    /// Marks every cell whose column meets a triangle clipped to the height slice. Cells
    /// that only touch a triangle count as occupied.
    pub fn rasterize(mesh: &TriangleMesh, params: &RoomParams) -> Result<Self> {
        // Written positively so NaN parameters are rejected too.
        let valid = params.cell_size > 0.0 && params.y_max > params.y_min;
        if !valid {
            return Err(Error::InvalidInput(format!("bad occupancy parameters {params:?}")));
        }
        let (lo, hi) = mesh.bounds();
        let origin = DVec2::new(lo.x, lo.z);
        let cells = |extent: f64| ((extent / params.cell_size - 1e-9).ceil().max(1.0)) as usize;
        let (nx, nz) = (cells(hi.x - lo.x), cells(hi.z - lo.z));
        let mut grid = OccupancyGrid {
            origin,
            cell_size: params.cell_size,
            nx,
            nz,
            occupied: vec![false; nx * nz],
        };
        for tri in 0..mesh.triangle_count() {
            let poly = clip_to_slice(&mesh.vertices(tri), params.y_min, params.y_max);
            if !poly.is_empty() {
                grid.mark_polygon(&poly);
            }
        }
        Ok(grid)
    }

    /// Grid built from explicit occupancy, row-major in `z`.
    pub fn from_cells(nx: usize, nz: usize, occupied: Vec<bool>) -> Result<Self> {
        if occupied.len() != nx * nz {
            return Err(Error::ShapeMismatch(format!("{nx}x{nz} grid needs {} cells", nx * nz)));
        }
        Ok(OccupancyGrid {
            origin: DVec2::ZERO,
            cell_size: 1.0,
            nx,
            nz,
            occupied,
        })
    }

    pub fn cell_center(&self, i: usize, k: usize) -> DVec2 {
        self.origin + DVec2::new(i as f64 + 0.5, k as f64 + 0.5) * self.cell_size
    }

    fn mark_polygon(&mut self, poly: &[DVec2]) {
        let (mut lo, mut hi) = (poly[0], poly[0]);
        for p in poly {
            lo = lo.min(*p);
            hi = hi.max(*p);
        }
        let eps = 1e-9 * self.cell_size;
        let to_cell = |v: f64, n: usize| (((v - eps) / self.cell_size).floor().max(0.0) as usize).min(n - 1);
        let (i0, k0) = (to_cell(lo.x - self.origin.x, self.nx), to_cell(lo.y - self.origin.y, self.nz));
        let to_cell_hi = |v: f64, n: usize| (((v + eps) / self.cell_size).floor().max(0.0) as usize).min(n - 1);
        let (i1, k1) = (to_cell_hi(hi.x - self.origin.x, self.nx), to_cell_hi(hi.y - self.origin.y, self.nz));
        for k in k0..=k1 {
            for i in i0..=i1 {
                let cell_lo = self.origin + DVec2::new(i as f64, k as f64) * self.cell_size;
                if polygon_touches_box(poly, cell_lo, cell_lo + DVec2::splat(self.cell_size), eps) {
                    self.occupied[k * self.nx + i] = true;
                }
            }
        }
    }
}

/// Part of a triangle with `y_min ≤ y ≤ y_max`, projected to xz.
fn clip_to_slice(tri: &[DVec3; 3], y_min: f64, y_max: f64) -> Vec<DVec2> {
    let mut poly: Vec<DVec3> = tri.to_vec();
    for (sign, bound) in [(1.0, y_min), (-1.0, y_max)] {
        // Keep points with sign·(y − bound) ≥ 0.
        let inside = |p: &DVec3| sign * (p.y - bound) >= 0.0;
        let mut out = Vec::with_capacity(poly.len() + 1);
        for j in 0..poly.len() {
            let (a, b) = (poly[j], poly[(j + 1) % poly.len()]);
            if inside(&a) {
                out.push(a);
            }
            if inside(&a) != inside(&b) {
                let t = (bound - a.y) / (b.y - a.y);
                out.push(a + (b - a) * t);
            }
        }
        poly = out;
        if poly.is_empty() {
            break;
        }
    }
    poly.into_iter().map(|p| DVec2::new(p.x, p.z)).collect()
}

/// Separating-axis test of a convex (possibly degenerate) polygon against a box; touching
/// within `eps` counts as overlap.
fn polygon_touches_box(poly: &[DVec2], lo: DVec2, hi: DVec2, eps: f64) -> bool {
    let corners = [lo, DVec2::new(hi.x, lo.y), hi, DVec2::new(lo.x, hi.y)];
    let separated = |axis: DVec2| {
        let range = |pts: &mut dyn Iterator<Item = f64>| {
            pts.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
        };
        let (p0, p1) = range(&mut poly.iter().map(|p| p.dot(axis)));
        let (b0, b1) = range(&mut corners.iter().map(|p| p.dot(axis)));
        p1 < b0 - eps || b1 < p0 - eps
    };
    if separated(DVec2::X) || separated(DVec2::Y) {
        return false;
    }
    for j in 0..poly.len() {
        let e = poly[(j + 1) % poly.len()] - poly[j];
        let len = e.length();
        if len > eps && separated(DVec2::new(-e.y, e.x) / len) {
            return false;
        }
    }
    true
}

/// 4-connected components of the free cells, numbered from 1 in scan order. Occupied cells
/// get 0. Returns the labels and the component count.
pub fn label_free_cells(grid: &OccupancyGrid) -> (Vec<u32>, u32) {
    let (nx, nz) = (grid.nx, grid.nz);
    let mut labels = vec![0u32; nx * nz];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..nx * nz {
        if grid.occupied[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            let (i, k) = (c % nx, c / nx);
            let mut visit = |n: usize| {
                if !grid.occupied[n] && labels[n] == 0 {
                    labels[n] = next;
                    queue.push_back(n);
                }
            };
            if i > 0 {
                visit(c - 1);
            }
            if i + 1 < nx {
                visit(c + 1);
            }
            if k > 0 {
                visit(c - nx);
            }
            if k + 1 < nz {
                visit(c + nx);
            }
        }
    }
    (labels, next)
}

/// Occupancy grid, per-cell room ids and the texture-space room mask.
#[derive(Clone, Debug)]
pub struct RoomMap {
    pub grid: OccupancyGrid,
    /// 0 for occupied cells, otherwise a room id in `1..=room_count`.
    pub cell_rooms: Vec<u32>,
    pub room_count: u32,
    /// Room id per atlas texel; 0 where no surface maps.
    pub texels: MaskImage,
}

impl RoomMap {
    /// Room of the free cell nearest to `p` (xz distance to cell centers, ties to the lower
    /// id).
    pub fn room_at(&self, p: DVec3) -> u32 {
        let g = &self.grid;
        let q = DVec2::new(p.x, p.z);
        let rel = (q - g.origin) / g.cell_size;
        let ci = (rel.x.floor().max(0.0) as usize).min(g.nx - 1) as isize;
        let ck = (rel.y.floor().max(0.0) as usize).min(g.nz - 1) as isize;
        // A point outside the grid is at most this far (in cells) from its clamped cell.
        let outside = (-rel.x).max(rel.x - g.nx as f64).max(-rel.y).max(rel.y - g.nz as f64).max(0.0);
        let mut best: Option<(f64, u32)> = None;
        let max_ring = g.nx.max(g.nz) as isize;
        for r in 0..=max_ring {
            if let Some((d, _)) = best {
                // Ring r cell centers are at least (r − 0.5 − outside) cells away.
                if (r as f64 - 0.5 - outside) * g.cell_size > d {
                    break;
                }
            }
            for k in (ck - r)..=(ck + r) {
                for i in (ci - r)..=(ci + r) {
                    let on_ring = (k - ck).abs() == r || (i - ci).abs() == r;
                    if !on_ring || i < 0 || k < 0 || i >= g.nx as isize || k >= g.nz as isize {
                        continue;
                    }
                    let id = self.cell_rooms[k as usize * g.nx + i as usize];
                    if id == 0 {
                        continue;
                    }
                    let d = q.distance(g.cell_center(i as usize, k as usize));
                    if best.is_none_or(|(bd, bid)| d < bd || (d == bd && id < bid)) {
                        best = Some((d, id));
                    }
                }
            }
        }
        best.map_or(0, |(_, id)| id)
    }
}

/// Rasterizes the slice, floods the free cells into rooms and labels each atlas texel with
/// the room of its surfel.
pub fn compute_rooms(mesh: &TriangleMesh, params: &RoomParams, texel_res: usize) -> Result<RoomMap> {
    let grid = OccupancyGrid::rasterize(mesh, params)?;
    rooms_from_grid(grid, mesh, texel_res)
}

pub(crate) fn rooms_from_grid(grid: OccupancyGrid, mesh: &TriangleMesh, texel_res: usize) -> Result<RoomMap> {
    let (cell_rooms, room_count) = label_free_cells(&grid);
    if room_count == 0 {
        return Err(Error::InvalidInput("every occupancy cell is occupied; no room can be formed".into()));
    }
    let mut map = RoomMap {
        grid,
        cell_rooms,
        room_count,
        texels: MaskImage::new(texel_res, texel_res),
    };
    let atlas = texel_surfels(mesh, texel_res, texel_res)?;
    for s in &atlas.surfels {
        let id = map.room_at(s.position);
        map.texels.set_texel(s.texel.0, s.texel.1, id);
    }
    Ok(map)
}
