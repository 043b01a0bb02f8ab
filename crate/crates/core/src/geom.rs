//! Planar primitives: points, simple polygons, convex clipping.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};
// Unused when a dependency links std and the inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Rotated by +90 degrees.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// Signed area of the triangle `(a, b, c)`; positive when counterclockwise.
pub fn triangle_signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * (b - a).cross(c - a)
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// A closed polygon given by its vertices; the closing edge is implicit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Polygon { vertices }
    }

    /// Axis-aligned rectangle, counterclockwise.
    pub fn rectangle(min: Point, max: Point) -> Self {
        Polygon::new(alloc::vec![min, Point::new(max.x, min.y), max, Point::new(min.x, max.y),])
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area; positive for counterclockwise orientation.
    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Area centroid. Falls back to the vertex mean for degenerate polygons.
    pub fn centroid(&self) -> Point {
        let mut a = 0.0;
        let mut c = Point::default();
        for (p, q) in self.edges() {
            let w = p.cross(q);
            a += w;
            c = c + (p + q) * w;
        }
        if a.abs() < 1e-300 {
            let n = self.vertices.len().max(1) as f64;
            let s = self.vertices.iter().fold(Point::default(), |acc, &p| acc + p);
            return s * (1.0 / n);
        }
        c * (1.0 / (3.0 * a))
    }

    /// Even-odd point containment.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges().map(|(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = Point::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Point::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }

    /// Sutherland–Hodgman clip of `self` against a convex counterclockwise
    /// window. `self` may be non-convex; the result then can contain
    /// zero-width bridges, which do not change its area.
    pub fn clip_convex(&self, window: &Polygon) -> Polygon {
        let mut out = self.vertices.clone();
        for (a, b) in window.edges() {
            if out.is_empty() {
                break;
            }
            let input = core::mem::take(&mut out);
            let edge = b - a;
            let side = |p: Point| edge.cross(p - a);
            let n = input.len();
            for i in 0..n {
                let cur = input[i];
                let prev = input[(i + n - 1) % n];
                let (sc, sp) = (side(cur), side(prev));
                if sc >= 0.0 {
                    if sp < 0.0 {
                        out.push(intersect(prev, cur, sp, sc));
                    }
                    out.push(cur);
                } else if sp >= 0.0 {
                    out.push(intersect(prev, cur, sp, sc));
                }
            }
        }
        Polygon::new(out)
    }

    /// Offsets a counterclockwise polygon inward by `distance`, moving every
    /// vertex along its angle bisector so that each edge shifts by exactly
    /// `distance`. Returns `None` when an edge flips direction, i.e. the
    /// offset collapses part of the polygon.
    pub fn offset_inward(&self, distance: f64) -> Option<Polygon> {
        let n = self.vertices.len();
        if n < 3 {
            return None;
        }
        // Inward normal of edge i (from vertex i to i+1) of a CCW polygon.
        let normals: Vec<Point> = self
            .edges()
            .map(|(a, b)| {
                let d = b - a;
                d.perp() * (1.0 / d.norm())
            })
            .collect();
        let mut verts = Vec::with_capacity(n);
        for i in 0..n {
            let n0 = normals[(i + n - 1) % n];
            let n1 = normals[i];
            let bis = n0 + n1;
            let len = bis.norm();
            if len < 1e-12 {
                return None;
            }
            let bis = bis * (1.0 / len);
            let cos = bis.dot(n1);
            if cos <= 1e-6 {
                return None;
            }
            verts.push(self.vertices[i] + bis * (distance / cos));
        }
        let out = Polygon::new(verts);
        for (i, (a, b)) in out.edges().enumerate() {
            let (p, q) = (self.vertices[i], self.vertices[(i + 1) % n]);
            if (b - a).dot(q - p) <= 0.0 {
                return None;
            }
        }
        if out.signed_area() <= 0.0 {
            return None;
        }
        Some(out)
    }
}

fn intersect(p: Point, q: Point, sp: f64, sq: f64) -> Point {
    let t = sp / (sp - sq);
    p + (q - p) * t
}
