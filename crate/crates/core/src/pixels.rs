//! Reconstruction pixel grid: a square lattice clipped to the shrunken
//! domain, independent of the forward mesh, with exact triangle overlaps.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
// Unused when a dependency links std and the inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::geom::{Point, Polygon};
use crate::mesh::TriMesh;
use crate::{Error, Result};

/// Boundary cells smaller than this fraction of a full cell are merged
/// into a neighbouring pixel.
const MERGE_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub origin: Point,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Lattice {
    pub fn cell_rect(&self, i: usize, j: usize) -> Polygon {
        let lo = Point::new(self.origin.x + i as f64 * self.spacing, self.origin.y + j as f64 * self.spacing);
        Polygon::rectangle(lo, Point::new(lo.x + self.spacing, lo.y + self.spacing))
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    fn cell_range(&self, lo: f64, hi: f64, origin: f64, n: usize) -> (usize, usize) {
        let a = ((lo - origin) / self.spacing).floor().max(0.0) as usize;
        let b = (((hi - origin) / self.spacing).floor().max(0.0) as usize).min(n.saturating_sub(1));
        (a.min(n), b)
    }
}

/// One reconstruction pixel: a union of clipped lattice cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Pixel {
    pub cells: Vec<(usize, usize)>,
    /// Clipped polygon of each cell, aligned with `cells`.
    pub parts: Vec<Polygon>,
    pub area: f64,
    pub centroid: Point,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub triangle: usize,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrid {
    pub lattice: Lattice,
    /// The shrunken reconstruction region.
    pub region: Polygon,
    pub pixels: Vec<Pixel>,
    /// For each pixel, the forward-mesh triangles it intersects.
    pub overlaps: Vec<Vec<Overlap>>,
    /// Triangle count of the mesh the overlaps refer to.
    pub mesh_triangles: usize,
    /// Pixel owning each lattice cell, row-major by `j * nx + i`.
    pub owner: Vec<Option<usize>>,
}

impl PixelGrid {
    pub fn n_pixels(&self) -> usize {
        self.pixels.len()
    }

    pub fn areas(&self) -> Vec<f64> {
        self.pixels.iter().map(|p| p.area).collect()
    }

    pub fn centroids(&self) -> Vec<Point> {
        self.pixels.iter().map(|p| p.centroid).collect()
    }

    pub fn owner_of(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.lattice.nx || j as usize >= self.lattice.ny {
            return None;
        }
        self.owner[self.lattice.cell_index(i as usize, j as usize)]
    }

    /// Pixels sharing an edge (or, with `diagonal`, a corner) with pixel `n`.
    pub fn neighbors(&self, n: usize, diagonal: bool) -> Vec<usize> {
        let mut out = Vec::new();
        for &(i, j) in &self.pixels[n].cells {
            for dj in -1isize..=1 {
                for di in -1isize..=1 {
                    if (di == 0 && dj == 0) || (!diagonal && di != 0 && dj != 0) {
                        continue;
                    }
                    if let Some(m) = self.owner_of(i as isize + di, j as isize + dj) {
                        if m != n && !out.contains(&m) {
                            out.push(m);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Pixels whose centroid satisfies `pred`.
    pub fn select(&self, pred: impl Fn(Point) -> bool) -> Vec<bool> {
        self.pixels.iter().map(|p| pred(p.centroid)).collect()
    }
}

/// Default margin between the pixel region and the boundary, in mean
/// boundary-edge lengths.
pub const DEFAULT_MARGIN_EDGES: f64 = 0.5;

/// `DEFAULT_MARGIN_EDGES` mean boundary-edge lengths.
pub fn default_margin(mesh: &TriMesh) -> f64 {
    DEFAULT_MARGIN_EDGES * mesh.mean_boundary_edge()
}

/// Builds about `target_np` pixels covering the mesh domain shrunk by
/// `boundary_margin`.
pub fn build_pixel_grid(mesh: &TriMesh, target_np: usize, boundary_margin: f64) -> Result<PixelGrid> {
    if target_np == 0 {
        return Err(Error::param("target_np", "must be positive"));
    }
    if !(boundary_margin >= 0.0) || !boundary_margin.is_finite() {
        return Err(Error::param("boundary_margin", format!("must be non-negative, got {boundary_margin}")));
    }
    let region = mesh
        .boundary_polygon()
        .offset_inward(boundary_margin)
        .ok_or_else(|| Error::param("boundary_margin", format!("margin {boundary_margin} leaves an empty region")))?;

    let partition = if target_np == 1 {
        single_cell(&region)
    } else {
        let area = region.area();
        let mut h = (area / target_np as f64).sqrt();
        let mut best = lattice_partition(&region, h);
        for _ in 0..40 {
            let n = best_count(&best);
            if n == target_np {
                break;
            }
            h *= (n as f64 / target_np as f64).sqrt();
            let candidate = lattice_partition(&region, h);
            if best_count(&candidate).abs_diff(target_np) < n.abs_diff(target_np) {
                best = candidate;
            } else {
                // Nudge off a plateau of the step function.
                h *= 1.0 + 0.003 * if n > target_np { 1.0 } else { -1.0 };
            }
        }
        best
    };

    let Partition { lattice, pixels, owner } = partition;
    let overlaps = compute_overlaps(mesh, &lattice, &pixels, &owner);
    Ok(PixelGrid { lattice, region, pixels, overlaps, mesh_triangles: mesh.n_triangles(), owner })
}

struct Partition {
    lattice: Lattice,
    pixels: Vec<Pixel>,
    owner: Vec<Option<usize>>,
}

fn best_count(p: &Partition) -> usize {
    p.pixels.len()
}

fn single_cell(region: &Polygon) -> Partition {
    let (lo, hi) = region.bounding_box();
    let spacing = (hi.x - lo.x).max(hi.y - lo.y);
    let lattice = Lattice { origin: lo, spacing, nx: 1, ny: 1 };
    let pixel =
        Pixel { cells: vec![(0, 0)], parts: vec![region.clone()], area: region.area(), centroid: region.centroid() };
    Partition { lattice, pixels: vec![pixel], owner: vec![Some(0)] }
}

/// Lattice with a cell corner at the bounding-box centre.
fn lattice_partition(region: &Polygon, h: f64) -> Partition {
    let (lo, hi) = region.bounding_box();
    let c = (lo + hi) * 0.5;
    let kx = (((hi.x - lo.x) * 0.5) / h).ceil().max(1.0) as usize;
    let ky = (((hi.y - lo.y) * 0.5) / h).ceil().max(1.0) as usize;
    let lattice =
        Lattice { origin: Point::new(c.x - kx as f64 * h, c.y - ky as f64 * h), spacing: h, nx: 2 * kx, ny: 2 * ky };
    let ncell = lattice.nx * lattice.ny;
    let mut polys: Vec<Option<Polygon>> = vec![None; ncell];
    let mut areas = vec![0.0; ncell];
    let tiny = 1e-12 * h * h;
    for j in 0..lattice.ny {
        for i in 0..lattice.nx {
            let clipped = region.clip_convex(&lattice.cell_rect(i, j));
            let a = clipped.area();
            if a > tiny {
                let k = lattice.cell_index(i, j);
                areas[k] = a;
                polys[k] = Some(clipped);
            }
        }
    }
    let full = MERGE_FRACTION * h * h;
    let is_seed = |k: usize| areas[k] >= full;
    let mut owner: Vec<Option<usize>> = vec![None; ncell];
    let mut pixels: Vec<Pixel> = Vec::new();
    for k in 0..ncell {
        if is_seed(k) {
            owner[k] = Some(pixels.len());
            pixels.push(Pixel { cells: Vec::new(), parts: Vec::new(), area: 0.0, centroid: Point::default() });
        }
    }
    let at = |i: isize, j: isize| -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= lattice.nx || j as usize >= lattice.ny {
            None
        } else {
            Some(lattice.cell_index(i as usize, j as usize))
        }
    };
    for j in 0..lattice.ny {
        for i in 0..lattice.nx {
            let k = lattice.cell_index(i, j);
            if polys[k].is_none() || is_seed(k) {
                continue;
            }
            let pick = |offsets: &[(isize, isize)]| {
                offsets
                    .iter()
                    .filter_map(|&(di, dj)| at(i as isize + di, j as isize + dj))
                    .filter(|&n| is_seed(n))
                    .max_by(|&a, &b| areas[a].total_cmp(&areas[b]).then(b.cmp(&a)))
            };
            let target =
                pick(&[(-1, 0), (1, 0), (0, -1), (0, 1)]).or_else(|| pick(&[(-1, -1), (1, -1), (-1, 1), (1, 1)]));
            owner[k] = match target {
                Some(n) => owner[n],
                None => {
                    pixels.push(Pixel { cells: Vec::new(), parts: Vec::new(), area: 0.0, centroid: Point::default() });
                    Some(pixels.len() - 1)
                }
            };
        }
    }
    for j in 0..lattice.ny {
        for i in 0..lattice.nx {
            let k = lattice.cell_index(i, j);
            if let (Some(p), Some(poly)) = (owner[k], polys[k].take()) {
                pixels[p].cells.push((i, j));
                pixels[p].parts.push(poly);
            }
        }
    }
    for px in &mut pixels {
        let mut area = 0.0;
        let mut moment = Point::default();
        for part in &px.parts {
            let a = part.area();
            area += a;
            moment = moment + part.centroid() * a;
        }
        px.area = area;
        px.centroid = moment * (1.0 / area);
    }
    Partition { lattice, pixels, owner }
}

fn compute_overlaps(mesh: &TriMesh, lattice: &Lattice, pixels: &[Pixel], owner: &[Option<usize>]) -> Vec<Vec<Overlap>> {
    // Locate the clipped polygon of each owned cell.
    let mut part_of: Vec<Option<(usize, usize)>> = vec![None; owner.len()];
    for (p, px) in pixels.iter().enumerate() {
        for (q, &(i, j)) in px.cells.iter().enumerate() {
            part_of[lattice.cell_index(i, j)] = Some((p, q));
        }
    }
    let mut overlaps: Vec<Vec<Overlap>> = vec![Vec::new(); pixels.len()];
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle_polygon(t);
        let (lo, hi) = tri.bounding_box();
        let (i0, i1) = lattice.cell_range(lo.x, hi.x, lattice.origin.x, lattice.nx);
        let (j0, j1) = lattice.cell_range(lo.y, hi.y, lattice.origin.y, lattice.ny);
        if i0 >= lattice.nx || j0 >= lattice.ny {
            continue;
        }
        for j in j0..=j1 {
            for i in i0..=i1 {
                let Some((p, q)) = part_of[lattice.cell_index(i, j)] else { continue };
                let a = pixels[p].parts[q].clip_convex(&tri).area();
                if a > 0.0 {
                    match overlaps[p].last_mut() {
                        Some(last) if last.triangle == t => last.area += a,
                        _ => overlaps[p].push(Overlap { triangle: t, area: a }),
                    }
                }
            }
        }
    }
    overlaps
}
