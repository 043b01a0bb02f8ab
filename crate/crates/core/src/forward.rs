//! P1 finite element solution of the point-electrode Neumann problem for
//! adjacent-pair current patterns, and the resulting voltage data.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
// Unused when a dependency links std and the inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{ElectrodeLayout, TriMesh};
use crate::sparse::{CsrMatrix, EnvelopeCholesky};
use crate::{Error, Result};

/// Assembles `K_il = sum_T sigma_T |T| grad(phi_i) . grad(phi_l)`.
pub fn assemble_stiffness(mesh: &TriMesh, sigma: &[f64]) -> Result<CsrMatrix> {
    if sigma.len() != mesh.n_triangles() {
        return Err(Error::ShapeMismatch(format!(
            "{} conductivities for {} triangles",
            sigma.len(),
            mesh.n_triangles()
        )));
    }
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let s = sigma[t];
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NonPositiveConductivity { triangle: t, value: s });
        }
        let g = mesh.hat_gradients(t);
        let w = s * mesh.triangle_area(t);
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((tri[a], tri[b], w * g[a].dot(g[b])));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.n_nodes(), &triplets))
}

/// Factorization of a Neumann stiffness matrix returning zero-mean
/// solutions. The constant kernel is removed by fixing one node during
/// elimination and re-centring the result, which yields the unique
/// zero-mean solution of the singular system.
#[derive(Debug, Clone)]
pub struct NeumannSolver {
    stiffness: CsrMatrix,
    factor: EnvelopeCholesky,
    pinned: usize,
}

impl NeumannSolver {
    pub fn new(stiffness: CsrMatrix) -> Result<Self> {
        let n = stiffness.dim();
        if n < 2 {
            return Err(Error::ShapeMismatch("stiffness matrix needs at least 2 nodes".into()));
        }
        let pinned = 0;
        let mut keep = vec![true; n];
        keep[pinned] = false;
        let factor = EnvelopeCholesky::factor_submatrix(&stiffness, &keep)?;
        Ok(NeumannSolver { stiffness, factor, pinned })
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Solves `K u = load` with `sum(u) = 0`. The load must sum to zero.
    pub fn solve(&self, load: &[f64]) -> Result<Vec<f64>> {
        let n = self.stiffness.dim();
        if load.len() != n {
            return Err(Error::ShapeMismatch(format!("load of length {} for {n} nodes", load.len())));
        }
        let sum: f64 = load.iter().sum();
        let scale: f64 = load.iter().map(|v| v.abs()).sum();
        if sum.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::IncompatibleLoad { sum });
        }
        let mut u = vec![0.0; n];
        self.factor.solve_with(|i| load[i], |i, v| u[i] = v);
        u[self.pinned] = 0.0;
        let mean = u.iter().sum::<f64>() / n as f64;
        u.iter_mut().for_each(|v| *v -= mean);
        Ok(u)
    }

    /// `|K u - load| / |load|` in the Euclidean norm.
    pub fn relative_residual(&self, u: &[f64], load: &[f64]) -> f64 {
        let ku = self.stiffness.mul_vec(u);
        let r: f64 = ku.iter().zip(load).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let l: f64 = load.iter().map(|v| v * v).sum::<f64>();
        (r / l).sqrt()
    }
}

/// Nodal load of drive pattern `j`: unit current in at `E_j`, out at `E_{j+1}`.
pub fn pattern_load(n_nodes: usize, layout: &ElectrodeLayout, j: usize) -> Vec<f64> {
    let mut f = vec![0.0; n_nodes];
    let (a, b) = layout.pair(j);
    f[a] += 1.0;
    f[b] -= 1.0;
    f
}

/// Potential of drive pattern `j` (0-based).
pub fn solve_pattern(solver: &NeumannSolver, layout: &ElectrodeLayout, j: usize) -> Result<Vec<f64>> {
    if j >= layout.n_electrodes() {
        return Err(Error::param("j", format!("pattern {j} out of range 0..{}", layout.n_electrodes())));
    }
    solver.solve(&pattern_load(solver.stiffness().dim(), layout, j))
}

/// Zero-mean nodal potentials `u_j` of all drive patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSet {
    pub potentials: Vec<Vec<f64>>,
}

impl PotentialSet {
    pub fn n_patterns(&self) -> usize {
        self.potentials.len()
    }

    pub fn pattern(&self, j: usize) -> &[f64] {
        &self.potentials[j]
    }
}

/// Mesh, electrodes and conductivity with the factored stiffness matrix.
#[derive(Debug, Clone)]
pub struct ForwardProblem<'a> {
    pub mesh: &'a TriMesh,
    pub layout: &'a ElectrodeLayout,
    pub sigma: Vec<f64>,
    solver: NeumannSolver,
}

impl<'a> ForwardProblem<'a> {
    pub fn new(mesh: &'a TriMesh, layout: &'a ElectrodeLayout, sigma: Vec<f64>) -> Result<Self> {
        let solver = NeumannSolver::new(assemble_stiffness(mesh, &sigma)?)?;
        Ok(ForwardProblem { mesh, layout, sigma, solver })
    }

    pub fn solver(&self) -> &NeumannSolver {
        &self.solver
    }

    pub fn solve_pattern(&self, j: usize) -> Result<Vec<f64>> {
        solve_pattern(&self.solver, self.layout, j)
    }

    pub fn solve_all(&self) -> Result<PotentialSet> {
        let potentials = (0..self.layout.n_electrodes()).map(|j| self.solve_pattern(j)).collect::<Result<Vec<_>>>()?;
        Ok(PotentialSet { potentials })
    }

    pub fn voltages(&self, label: &str) -> Result<VoltageDataSet> {
        let u = self.solve_all()?;
        Ok(measure_voltages(&u, self.layout, label))
    }
}

/// Adjacent-pair voltages: entry `(k, j)` is `V_{j,k} = u_j(E_k) - u_j(E_{k+1})`,
/// so column `j` holds the measurements of drive `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageDataSet {
    pub v: DMatrix<f64>,
    pub label: String,
}

impl VoltageDataSet {
    pub fn n_electrodes(&self) -> usize {
        self.v.nrows()
    }

    /// `max |V - V^T| / max |V|`.
    pub fn reciprocity_error(&self) -> f64 {
        let d = (&self.v - self.v.transpose()).amax();
        d / self.v.amax()
    }
}

pub fn measure_voltages(potentials: &PotentialSet, layout: &ElectrodeLayout, label: &str) -> VoltageDataSet {
    let n = layout.n_electrodes();
    let v = DMatrix::from_fn(n, n, |k, j| {
        let u = potentials.pattern(j);
        let (a, b) = layout.pair(k);
        u[a] - u[b]
    });
    VoltageDataSet { v, label: label.into() }
}

/// Difference data `dV_{j,k} = V_{j,k}[sigma0] - V_{j,k}[sigma]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceData {
    /// Stacked vector: block `j` (entries `j*n_E .. (j+1)*n_E`) holds `dV_j`.
    pub dv_vec: DVector<f64>,
    /// Matrix whose column `j` is `dV_j`.
    pub dv_mat: DMatrix<f64>,
    pub noise_level: f64,
    pub seed: Option<u64>,
}

impl DifferenceData {
    pub fn from_matrix(dv_mat: DMatrix<f64>) -> Self {
        let dv_vec = DVector::from_column_slice(dv_mat.as_slice());
        DifferenceData { dv_vec, dv_mat, noise_level: 0.0, seed: None }
    }

    pub fn n_electrodes(&self) -> usize {
        self.dv_mat.nrows()
    }
}

pub fn difference_data(v_ref: &VoltageDataSet, v_meas: &VoltageDataSet) -> Result<DifferenceData> {
    if v_ref.v.shape() != v_meas.v.shape() || v_ref.v.nrows() != v_ref.v.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "reference {:?} vs measured {:?}",
            v_ref.v.shape(),
            v_meas.v.shape()
        )));
    }
    Ok(DifferenceData::from_matrix(&v_ref.v - &v_meas.v))
}

/// Adds `level * max|dV| * xi` to every entry, `xi ~ U[-1, 1]` from a
/// ChaCha8 stream seeded with `seed`.
pub fn add_noise(data: &DifferenceData, level: f64, seed: u64) -> Result<DifferenceData> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::param("level", format!("noise level must be non-negative, got {level}")));
    }
    if level == 0.0 {
        return Ok(data.clone());
    }
    let scale = level * data.dv_vec.amax();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = data.dv_mat.clone();
    for x in m.iter_mut() {
        *x += scale * rng.gen_range(-1.0..=1.0);
    }
    let mut out = DifferenceData::from_matrix(m);
    out.noise_level = level;
    out.seed = Some(seed);
    Ok(out)
}
