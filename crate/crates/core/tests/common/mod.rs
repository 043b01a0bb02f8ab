#![allow(dead_code)]

use eit_core::mesh::default_deformation;
use eit_core::pixels::default_margin;
use eit_core::*;
use nalgebra::DMatrix;

pub struct Setup {
    pub mesh: TriMesh,
    pub layout: ElectrodeLayout,
    pub grid: PixelGrid,
    pub u0: forward::PotentialSet,
    pub v0: VoltageDataSet,
    pub s: SensitivityMatrix,
}

impl Setup {
    pub fn disc(target: usize, np: usize) -> Self {
        Self::from_mesh(build_disc_mesh(1.0, target).unwrap(), np)
    }

    pub fn deformed(target: usize, np: usize) -> Self {
        Self::from_mesh(build_deformed_mesh(default_deformation, target).unwrap(), np)
    }

    pub fn from_mesh(mesh: TriMesh, np: usize) -> Self {
        let layout = place_electrodes(&mesh, 16).unwrap();
        let grid = build_pixel_grid(&mesh, np, default_margin(&mesh)).unwrap();
        let u0 = ForwardProblem::new(&mesh, &layout, vec![1.0; mesh.n_triangles()]).unwrap().solve_all().unwrap();
        let v0 = measure_voltages(&u0, &layout, "reference");
        let s = assemble_sensitivity(&mesh, &u0, &grid).unwrap();
        Setup { mesh, layout, grid, u0, v0, s }
    }

    pub fn reference(&self) -> ForwardProblem<'_> {
        ForwardProblem::new(&self.mesh, &self.layout, vec![1.0; self.mesh.n_triangles()]).unwrap()
    }

    /// Returns the per-triangle conductivity, its potentials and the clean data.
    pub fn simulate(&self, phantom: &Phantom) -> (Vec<f64>, forward::PotentialSet, DifferenceData) {
        let sigma = rasterize_phantom(phantom, &self.mesh).unwrap();
        let fp = ForwardProblem::new(&self.mesh, &self.layout, sigma.clone()).unwrap();
        let u = fp.solve_all().unwrap();
        let v = measure_voltages(&u, &self.layout, "measured");
        (sigma, u, difference_data(&self.v0, &v).unwrap())
    }
}

pub fn phantom(anomalies: &[Anomaly]) -> Phantom {
    anomalies.iter().cloned().fold(Phantom::homogeneous(1.0), Phantom::with_anomaly)
}

/// Gradient of the linear interpolant on triangle `t`, from the 2x2 system
/// `[b - a; c - a] g = [u_b - u_a; u_c - u_a]`.
pub fn oracle_gradient(mesh: &TriMesh, t: usize, u: &[f64]) -> (f64, f64) {
    let [ia, ib, ic] = mesh.triangles[t];
    let (a, b, c) = (mesh.nodes[ia], mesh.nodes[ib], mesh.nodes[ic]);
    let (m11, m12, m21, m22) = (b.x - a.x, b.y - a.y, c.x - a.x, c.y - a.y);
    let (r1, r2) = (u[ib] - u[ia], u[ic] - u[ia]);
    let det = m11 * m22 - m12 * m21;
    ((r1 * m22 - m12 * r2) / det, (m11 * r2 - r1 * m21) / det)
}

/// Triangle area from the shoelace formula.
pub fn oracle_area(mesh: &TriMesh, t: usize) -> f64 {
    let [a, b, c] = mesh.triangles[t].map(|i| mesh.nodes[i]);
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

/// `sum_T w_T |T| grad u_j . grad v_k` for all `j, k`, laid out like `dv_mat`
/// (entry `(k, j)`).
pub fn oracle_cross_integrals(
    mesh: &TriMesh,
    weight: &[f64],
    u: &forward::PotentialSet,
    v: &forward::PotentialSet,
) -> DMatrix<f64> {
    let ne = u.n_patterns();
    let mut out = DMatrix::zeros(ne, ne);
    for t in 0..mesh.n_triangles() {
        if weight[t] == 0.0 {
            continue;
        }
        let scale = weight[t] * oracle_area(mesh, t);
        let gu: Vec<_> = (0..ne).map(|j| oracle_gradient(mesh, t, u.pattern(j))).collect();
        let gv: Vec<_> = (0..ne).map(|k| oracle_gradient(mesh, t, v.pattern(k))).collect();
        for j in 0..ne {
            for k in 0..ne {
                out[(k, j)] += scale * (gu[j].0 * gv[k].0 + gu[j].1 * gv[k].1);
            }
        }
    }
    out
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax()
}
