//! Triangular forward meshes of star-shaped domains and electrode placement.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
// Unused when a dependency links std and the inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::geom::{triangle_signed_area, Point, Polygon};
use crate::{Error, Result};

/// Ring node counts are multiples of this so that 8-, 16- and 32-electrode
/// layouts sit on rotationally equivalent nodes.
const RING_QUANTUM: usize = 16;

/// Conforming counterclockwise triangulation with an ordered boundary loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    /// Boundary nodes in counterclockwise order; the loop closes implicitly.
    pub boundary_nodes: Vec<usize>,
}

impl TriMesh {
    /// Builds a mesh and checks all structural invariants.
    pub fn new(nodes: Vec<Point>, triangles: Vec<[usize; 3]>, boundary_nodes: Vec<usize>) -> Result<Self> {
        let mesh = TriMesh { nodes, triangles, boundary_nodes };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        triangle_signed_area(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.vertices(t);
        (a + b + c) * (1.0 / 3.0)
    }

    pub fn triangle_polygon(&self, t: usize) -> Polygon {
        Polygon::new(self.vertices(t).to_vec())
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Gradients of the three P1 hat functions on triangle `t`.
    pub fn hat_gradients(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.vertices(t);
        let inv = 1.0 / (2.0 * triangle_signed_area(a, b, c));
        // grad phi_i = perp(x_k - x_j) / (2A) for the cyclic triple (i, j, k)
        [(c - b).perp() * inv, (a - c).perp() * inv, (b - a).perp() * inv]
    }

    /// Constant gradient of the P1 field `u` on triangle `t`.
    pub fn field_gradient(&self, t: usize, u: &[f64]) -> Point {
        let g = self.hat_gradients(t);
        let [a, b, c] = self.triangles[t];
        g[0] * u[a] + g[1] * u[b] + g[2] * u[c]
    }

    pub fn boundary_polygon(&self) -> Polygon {
        Polygon::new(self.boundary_nodes.iter().map(|&i| self.nodes[i]).collect())
    }

    pub fn boundary_edge_lengths(&self) -> Vec<f64> {
        let b = &self.boundary_nodes;
        (0..b.len()).map(|i| self.nodes[b[i]].distance(self.nodes[b[(i + 1) % b.len()]])).collect()
    }

    pub fn mean_boundary_edge(&self) -> f64 {
        let l = self.boundary_edge_lengths();
        l.iter().sum::<f64>() / l.len() as f64
    }

    /// Checks orientation, conformity and the boundary loop.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        let mut edges: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing node")));
            }
            let area = self.triangle_area(t);
            if !(area > 0.0) {
                return Err(Error::InvalidMesh(format!("triangle {t} has signed area {area}")));
            }
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        if let Some((e, c)) = edges.iter().find(|(_, &c)| c > 2) {
            return Err(Error::InvalidMesh(format!("edge {e:?} shared by {c} triangles")));
        }
        let n_boundary_edges = edges.values().filter(|&&c| c == 1).count();
        let b = &self.boundary_nodes;
        if b.len() < 3 || b.len() != n_boundary_edges {
            return Err(Error::InvalidMesh(format!(
                "boundary loop has {} nodes but the mesh has {} boundary edges",
                b.len(),
                n_boundary_edges
            )));
        }
        let mut seen = alloc::vec![false; n];
        for i in 0..b.len() {
            let (p, q) = (b[i], b[(i + 1) % b.len()]);
            if p >= n || seen[p] {
                return Err(Error::InvalidMesh(format!("boundary node {p} repeated or missing")));
            }
            seen[p] = true;
            if edges.get(&(p.min(q), p.max(q))) != Some(&1) {
                return Err(Error::InvalidMesh(format!("({p}, {q}) is not a boundary edge")));
            }
        }
        if self.boundary_polygon().signed_area() <= 0.0 {
            return Err(Error::InvalidMesh("boundary loop is not counterclockwise".into()));
        }
        Ok(())
    }
}

/// Mesh of the disc of given radius centred at the origin.
pub fn build_disc_mesh(radius: f64, target_elements: usize) -> Result<TriMesh> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::param("radius", format!("must be positive, got {radius}")));
    }
    build_star_mesh(|_| radius, target_elements)
}

/// Mesh of the star-shaped domain `{ (r cos t, r sin t) : r < radius(t) }`.
///
/// The radius function must be positive and 2π-periodic.
pub fn build_deformed_mesh<F>(boundary_radius: F, target_elements: usize) -> Result<TriMesh>
where
    F: Fn(f64) -> f64,
{
    const SAMPLES: usize = 4096;
    for i in 0..SAMPLES {
        let t = 2.0 * PI * i as f64 / SAMPLES as f64;
        let r = boundary_radius(t);
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::param("boundary_radius", format!("r({t:.4}) = {r} is not positive")));
        }
    }
    build_star_mesh(boundary_radius, target_elements)
}

/// Default deformed domain: `r(t) = 1 + 0.15 cos(2t)`.
pub fn default_deformation(t: f64) -> f64 {
    1.0 + 0.15 * (2.0 * t).cos()
}

fn ring_size(ring: usize) -> usize {
    // Hexagonal-like growth of 6 nodes per ring, quantised.
    let q = ((6 * ring) as f64 / RING_QUANTUM as f64).round() as usize;
    RING_QUANTUM * q.max(1)
}

fn triangle_count(rings: usize) -> usize {
    (1..=rings).map(|i| if i == 1 { ring_size(1) } else { ring_size(i - 1) + ring_size(i) }).sum()
}

/// Concentric-ring mesh: ring `i` of `N` sits at radial fraction `i/N` and
/// carries [`ring_size`]`(i)` nodes, staggered by half a step on odd rings.
/// Consecutive rings are stitched by an angular merge with exact integer
/// comparisons, so the connectivity is rotation invariant.
fn build_star_mesh<F>(radius: F, target_elements: usize) -> Result<TriMesh>
where
    F: Fn(f64) -> f64,
{
    if target_elements < 16 {
        return Err(Error::param("target_elements", format!("must be at least 16, got {target_elements}")));
    }
    let rings = (1..)
        .take_while(|&n| n == 1 || triangle_count(n - 1) < target_elements)
        .min_by_key(|&n| triangle_count(n).abs_diff(target_elements))
        .unwrap_or(1);

    let mut nodes = alloc::vec![Point::new(0.0, 0.0)];
    let mut ring_start = alloc::vec![0usize];
    for i in 1..=rings {
        let m = ring_size(i);
        ring_start.push(nodes.len());
        let frac = i as f64 / rings as f64;
        for k in 0..m {
            let t = angle(k, i % 2, m);
            let r = frac * radius(t);
            nodes.push(Point::new(r * t.cos(), r * t.sin()));
        }
    }

    let mut triangles = Vec::with_capacity(triangle_count(rings));
    let m1 = ring_size(1);
    for k in 0..m1 {
        triangles.push([0, 1 + k, 1 + (k + 1) % m1]);
    }
    for i in 2..=rings {
        let (ma, mb) = (ring_size(i - 1), ring_size(i));
        let (sa, sb) = ((i - 1) % 2, i % 2);
        let (oa, ob) = (ring_start[i - 1], ring_start[i]);
        let (mut a, mut b) = (0usize, 0usize);
        while a < ma || b < mb {
            // Compare the angles of the next inner and outer nodes exactly:
            // angle(k, s, m) = pi (2k + s) / m.
            let advance_inner = if a == ma {
                false
            } else if b == mb {
                true
            } else {
                ((2 * (a + 1) + sa) * mb) <= ((2 * (b + 1) + sb) * ma)
            };
            let (pa, pb) = (oa + a % ma, ob + b % mb);
            if advance_inner {
                triangles.push([pa, pb, oa + (a + 1) % ma]);
                a += 1;
            } else {
                triangles.push([pa, pb, ob + (b + 1) % mb]);
                b += 1;
            }
        }
    }
    let boundary = (ring_start[rings]..nodes.len()).collect();
    TriMesh::new(nodes, triangles, boundary)
}

fn angle(k: usize, stagger: usize, m: usize) -> f64 {
    PI * (2 * k + stagger) as f64 / m as f64
}

/// Point electrodes on boundary nodes, ordered counterclockwise. Drive and
/// measurement pairs are `(k, k + 1 mod n_E)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectrodeLayout {
    pub electrode_nodes: Vec<usize>,
}

impl ElectrodeLayout {
    pub fn n_electrodes(&self) -> usize {
        self.electrode_nodes.len()
    }

    /// Node of electrode `k`, with wraparound.
    pub fn node(&self, k: usize) -> usize {
        self.electrode_nodes[k % self.electrode_nodes.len()]
    }

    /// Nodes of the adjacent pair `(E_k, E_{k+1})`.
    pub fn pair(&self, k: usize) -> (usize, usize) {
        (self.node(k), self.node(k + 1))
    }
}

/// Places `n_e` electrodes at the boundary nodes nearest to `n_e`
/// equispaced arc-length positions, starting at the first boundary node.
pub fn place_electrodes(mesh: &TriMesh, n_e: usize) -> Result<ElectrodeLayout> {
    let b = &mesh.boundary_nodes;
    if n_e < 2 || n_e > b.len() {
        return Err(Error::param("n_e", format!("must lie in 2..={} (boundary nodes), got {n_e}", b.len())));
    }
    let lengths = mesh.boundary_edge_lengths();
    let total: f64 = lengths.iter().sum();
    let mut arc = Vec::with_capacity(b.len());
    let mut s = 0.0;
    for l in &lengths {
        arc.push(s);
        s += l;
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(n_e);
    let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
    for k in 0..n_e {
        let target = total * k as f64 / n_e as f64;
        let best = (0..b.len())
            .min_by(|&i, &j| {
                let di = cyclic_gap(arc[i], target, total);
                let dj = cyclic_gap(arc[j], target, total);
                di.total_cmp(&dj)
            })
            .expect("boundary is non-empty");
        if let Some(&first) = owner.get(&best) {
            return Err(Error::ElectrodeCollision { first, second: k, node: b[best] });
        }
        owner.insert(best, k);
        chosen.push(b[best]);
    }
    Ok(ElectrodeLayout { electrode_nodes: chosen })
}

fn cyclic_gap(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).abs() % period;
    d.min(period - d)
}
