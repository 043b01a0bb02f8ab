//! Piecewise-constant conductivity phantoms.

use alloc::format;
use alloc::vec::Vec;

use crate::geom::{Point, Polygon};
use crate::mesh::TriMesh;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Disc {
        center: Point,
        radius: f64,
    },
    /// Counterclockwise simple polygon.
    Polygon(Polygon),
}

impl Shape {
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Shape::Disc { center, radius } => p.distance(*center) < *radius,
            Shape::Polygon(poly) => poly.contains(p),
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Shape::Disc { radius, .. } => core::f64::consts::PI * radius * radius,
            Shape::Polygon(poly) => poly.area(),
        }
    }

    pub fn centroid(&self) -> Point {
        match self {
            Shape::Disc { center, .. } => *center,
            Shape::Polygon(poly) => poly.centroid(),
        }
    }

    /// Smallest distance between the shape and the boundary of `domain`;
    /// negative when the shape reaches outside.
    fn clearance(&self, domain: &Polygon) -> f64 {
        match self {
            Shape::Disc { center, radius } => {
                if !domain.contains(*center) {
                    return f64::NEG_INFINITY;
                }
                domain.boundary_distance(*center) - radius
            }
            Shape::Polygon(poly) => {
                let mut clearance = f64::INFINITY;
                for v in &poly.vertices {
                    if !domain.contains(*v) {
                        return f64::NEG_INFINITY;
                    }
                    clearance = clearance.min(domain.boundary_distance(*v));
                }
                if domain.vertices.iter().any(|v| poly.contains(*v)) {
                    return f64::NEG_INFINITY;
                }
                clearance
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Anomaly {
    pub shape: Shape,
    /// Conductivity change inside the shape.
    pub contrast: f64,
}

impl Anomaly {
    pub fn disc(center: Point, radius: f64, contrast: f64) -> Self {
        Anomaly { shape: Shape::Disc { center, radius }, contrast }
    }
}

/// Reference conductivity plus anomalies `sigma = sigma0 + contrast * chi_D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub sigma0: f64,
    pub anomalies: Vec<Anomaly>,
    /// Required clearance between every anomaly and the domain boundary.
    pub interior_margin: f64,
}

impl Default for Phantom {
    fn default() -> Self {
        Phantom { sigma0: 1.0, anomalies: Vec::new(), interior_margin: 0.05 }
    }
}

impl Phantom {
    pub fn homogeneous(sigma0: f64) -> Self {
        Phantom { sigma0, ..Default::default() }
    }

    pub fn with_anomaly(mut self, anomaly: Anomaly) -> Self {
        self.anomalies.push(anomaly);
        self
    }

    /// Conductivity at a point.
    pub fn sigma_at(&self, p: Point) -> f64 {
        self.sigma0 + self.anomalies.iter().filter(|a| a.shape.contains(p)).map(|a| a.contrast).sum::<f64>()
    }

    /// Contrast at a point (`sigma - sigma0`).
    pub fn contrast_at(&self, p: Point) -> f64 {
        self.sigma_at(p) - self.sigma0
    }

    pub fn is_inside_anomaly(&self, p: Point) -> bool {
        self.anomalies.iter().any(|a| a.shape.contains(p))
    }

    /// Checks positivity and the interior clearance against `mesh`.
    pub fn validate(&self, mesh: &TriMesh) -> Result<()> {
        if !(self.sigma0 > 0.0) || !self.sigma0.is_finite() {
            return Err(Error::param("sigma0", format!("must be positive, got {}", self.sigma0)));
        }
        if !(self.interior_margin > 0.0) {
            return Err(Error::param("interior_margin", "must be positive"));
        }
        let domain = mesh.boundary_polygon();
        for (index, a) in self.anomalies.iter().enumerate() {
            if !a.contrast.is_finite() {
                return Err(Error::param("contrast", format!("anomaly {index} has contrast {}", a.contrast)));
            }
            if let Shape::Disc { radius, .. } = a.shape {
                if !(radius > 0.0) {
                    return Err(Error::param("radius", format!("anomaly {index} has radius {radius}")));
                }
            }
            let clearance = a.shape.clearance(&domain);
            if clearance < self.interior_margin {
                return Err(Error::AnomalyOutsideDomain {
                    index,
                    reason: format!("clearance {clearance:.4} below margin {}", self.interior_margin),
                });
            }
        }
        // Worst case sum of overlapping negative contrasts.
        let lowest = self.sigma0 + self.anomalies.iter().map(|a| a.contrast.min(0.0)).sum::<f64>();
        if !(lowest > 0.0) {
            return Err(Error::param("contrast", format!("conductivity can reach {lowest}")));
        }
        Ok(())
    }
}

/// Per-triangle conductivity: a triangle takes the anomaly contrast when its
/// centroid lies inside the anomaly.
pub fn rasterize_phantom(phantom: &Phantom, mesh: &TriMesh) -> Result<Vec<f64>> {
    phantom.validate(mesh)?;
    Ok((0..mesh.n_triangles()).map(|t| phantom.sigma_at(mesh.centroid(t))).collect())
}
