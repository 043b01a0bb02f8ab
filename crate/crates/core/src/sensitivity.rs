//! Linearized sensitivity matrix over the pixel grid and pixel-dipole
//! boundary voltages.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, DVectorView, Dyn, U1};

use crate::forward::{ForwardProblem, PotentialSet};
use crate::geom::Point;
use crate::mesh::TriMesh;
use crate::pixels::PixelGrid;
use crate::{Error, Result};

/// `S` with `n_E` stacked blocks; row `j * n_E + k`, column `n` holds
/// `int_{q_n} grad u_j . grad u_k` for the reference potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix {
    pub matrix: DMatrix<f64>,
    pub n_electrodes: usize,
}

impl SensitivityMatrix {
    pub fn n_pixels(&self) -> usize {
        self.matrix.ncols()
    }

    /// Column `n` of block `S_j`, i.e. the dipole voltages of pixel `n`
    /// under drive `j`.
    pub fn block_column(&self, j: usize, n: usize) -> DVectorView<'_, f64> {
        self.matrix.generic_view((j * self.n_electrodes, n), (Dyn(self.n_electrodes), U1))
    }

    /// Largest `|S_{(j,k),n} - S_{(k,j),n}|` relative to `max |S|`.
    pub fn cross_block_asymmetry(&self) -> f64 {
        let ne = self.n_electrodes;
        let mut worst = 0.0f64;
        for n in 0..self.n_pixels() {
            for j in 0..ne {
                for k in 0..j {
                    let d = self.matrix[(j * ne + k, n)] - self.matrix[(k * ne + j, n)];
                    worst = worst.max(d.abs());
                }
            }
        }
        worst / self.matrix.amax()
    }

    /// `S * x` as a stacked data vector.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }
}

/// Per-triangle gradients of every potential: `grads[j][t]`.
pub fn potential_gradients(mesh: &TriMesh, potentials: &PotentialSet) -> Vec<Vec<Point>> {
    potentials.potentials.iter().map(|u| (0..mesh.n_triangles()).map(|t| mesh.field_gradient(t, u)).collect()).collect()
}

fn check_grid(mesh: &TriMesh, grid: &PixelGrid) -> Result<()> {
    if grid.mesh_triangles != mesh.n_triangles() {
        return Err(Error::ShapeMismatch(format!(
            "pixel grid built on a mesh with {} triangles, got {}",
            grid.mesh_triangles,
            mesh.n_triangles()
        )));
    }
    Ok(())
}

/// Assembles `S` from exact triangle/pixel overlap areas; the potential
/// gradients are constant on each triangle, so the pixel integrals are exact.
pub fn assemble_sensitivity(mesh: &TriMesh, potentials0: &PotentialSet, grid: &PixelGrid) -> Result<SensitivityMatrix> {
    check_grid(mesh, grid)?;
    let ne = potentials0.n_patterns();
    if potentials0.potentials.iter().any(|u| u.len() != mesh.n_nodes()) {
        return Err(Error::ShapeMismatch("potentials do not match the mesh".into()));
    }
    let grads = potential_gradients(mesh, potentials0);
    let mut s = DMatrix::zeros(ne * ne, grid.n_pixels());
    let mut g = vec![Point::default(); ne];
    for (n, overlaps) in grid.overlaps.iter().enumerate() {
        let mut col = s.column_mut(n);
        for o in overlaps {
            for (j, gj) in g.iter_mut().enumerate() {
                *gj = grads[j][o.triangle];
            }
            for j in 0..ne {
                for k in 0..=j {
                    let v = o.area * g[j].dot(g[k]);
                    col[j * ne + k] += v;
                    if k != j {
                        col[k * ne + j] += v;
                    }
                }
            }
        }
    }
    Ok(SensitivityMatrix { matrix: s, n_electrodes: ne })
}

/// Boundary voltages `Phi_j^n(k) = phi(E_k) - phi(E_{k+1})` of the pixel
/// dipole field `phi`, the zero-mean Galerkin solution of
/// `int sigma0 grad phi . grad v = int_{q_n} grad u_j . grad v` for all test
/// functions `v`.
pub fn pixel_dipole_voltages(
    reference: &ForwardProblem<'_>,
    potentials0: &PotentialSet,
    grid: &PixelGrid,
    j: usize,
    n: usize,
) -> Result<DVector<f64>> {
    let mesh = reference.mesh;
    check_grid(mesh, grid)?;
    if n >= grid.n_pixels() {
        return Err(Error::PixelOutOfRange(n));
    }
    if j >= potentials0.n_patterns() {
        return Err(Error::param("j", format!("pattern {j} out of range")));
    }
    let u = potentials0.pattern(j);
    let mut rhs = vec![0.0; mesh.n_nodes()];
    for o in &grid.overlaps[n] {
        let gu = mesh.field_gradient(o.triangle, u);
        let hats = mesh.hat_gradients(o.triangle);
        for (a, &node) in mesh.triangles[o.triangle].iter().enumerate() {
            rhs[node] += o.area * gu.dot(hats[a]);
        }
    }
    let phi = reference.solver().solve(&rhs)?;
    let layout = reference.layout;
    Ok(DVector::from_fn(layout.n_electrodes(), |k, _| {
        let (a, b) = layout.pair(k);
        phi[a] - phi[b]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disc_mesh, place_electrodes};
    use crate::pixels::{build_pixel_grid, default_margin};

    #[test]
    fn dipole_voltages_match_columns() {
        let mesh = build_disc_mesh(1.0, 600).unwrap();
        let layout = place_electrodes(&mesh, 8).unwrap();
        let grid = build_pixel_grid(&mesh, 60, default_margin(&mesh)).unwrap();
        let fp = ForwardProblem::new(&mesh, &layout, vec![1.0; mesh.n_triangles()]).unwrap();
        let u0 = fp.solve_all().unwrap();
        let s = assemble_sensitivity(&mesh, &u0, &grid).unwrap();
        assert!(s.cross_block_asymmetry() < 1e-10);
        for (j, n) in [(0, 0), (3, 17), (7, 59)] {
            let phi = pixel_dipole_voltages(&fp, &u0, &grid, j, n).unwrap();
            let col = s.block_column(j, n);
            let err = (&phi - col).norm() / col.norm();
            assert!(err < 1e-9, "j={j} n={n} err={err}");
            assert!(phi.sum().abs() < 1e-12 * phi.amax().max(1e-300));
        }
        assert!(matches!(pixel_dipole_voltages(&fp, &u0, &grid, 0, 60), Err(Error::PixelOutOfRange(60))));
    }

    #[test]
    fn grid_from_other_mesh_is_rejected() {
        let mesh = build_disc_mesh(1.0, 600).unwrap();
        let other = build_disc_mesh(1.0, 300).unwrap();
        let layout = place_electrodes(&mesh, 8).unwrap();
        let grid = build_pixel_grid(&other, 20, 0.1).unwrap();
        let u0 = ForwardProblem::new(&mesh, &layout, vec![1.0; mesh.n_triangles()]).unwrap().solve_all().unwrap();
        assert!(assemble_sensitivity(&mesh, &u0, &grid).is_err());
    }
}
