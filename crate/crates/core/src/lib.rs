//! Difference electrical impedance tomography on a 2D domain with point
//! electrodes and adjacent-pair drive patterns.
//!
//! The crate covers the full numerical pipeline and performs no IO:
//!
//! * [`mesh`], [`phantom`] and [`pixels`] build the forward mesh, the
//!   conductivity phantoms and the (independent) reconstruction pixel grid;
//! * [`forward`] solves the Neumann problem with P1 finite elements and
//!   extracts voltage data;
//! * [`sensitivity`] assembles the linearized sensitivity matrix and the
//!   pixel-dipole voltages;
//! * [`sfm`] computes the sensitivity-based factorization index and the
//!   weight image;
//! * [`recon`] implements the tSVD reconstruction and the two hybrid
//!   reconstructions built on the weight image;
//! * [`metrics`] scores reconstructions against the true phantom.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod forward;
pub mod geom;
pub mod mesh;
pub mod metrics;
pub mod phantom;
pub mod pixels;
pub mod recon;
pub mod sensitivity;
pub mod sfm;
pub mod sparse;

pub use error::{Error, Result};
pub use forward::{
    add_noise, assemble_stiffness, difference_data, measure_voltages, solve_pattern, DifferenceData, ForwardProblem,
    PotentialSet, VoltageDataSet,
};
pub use geom::{Point, Polygon};
pub use mesh::{build_deformed_mesh, build_disc_mesh, place_electrodes, ElectrodeLayout, TriMesh};
pub use metrics::Metrics;
pub use phantom::{rasterize_phantom, Anomaly, Phantom, Shape};
pub use pixels::{build_pixel_grid, PixelGrid};
pub use recon::{select_t2, tsvd, LinearizedSystem, Method, ReconstructionResult, T2Rule, TruncationRule, TsvdFactors};
pub use sensitivity::{assemble_sensitivity, pixel_dipole_voltages, SensitivityMatrix};
pub use sfm::{build_data_inverse, compute_weights, compute_zeta, RegularizedDataInverse, SfmIndexField};
