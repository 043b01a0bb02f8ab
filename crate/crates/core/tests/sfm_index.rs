mod common;

use common::*;
use eit_core::sfm::{build_data_inverse, DEFAULT_EPS_ZETA};
use eit_core::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ideal linear data: column `k` of the data matrix is `S_k chi_D`.
fn ideal_data(s: &SensitivityMatrix, chi: &[f64]) -> DMatrix<f64> {
    let x = DVector::from_column_slice(chi);
    let stacked = &s.matrix * x;
    DMatrix::from_column_slice(s.n_electrodes, s.n_electrodes, stacked.as_slice())
}

fn coarse_case() -> (Setup, Vec<bool>) {
    let setup = Setup::disc(1200, 200);
    let inside = setup.grid.select(|p| p.distance(Point::new(0.25, 0.15)) < 0.35);
    (setup, inside)
}

fn chi(inside: &[bool]) -> Vec<f64> {
    inside.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

#[test]
fn index_bounded_by_dipole_energy_inside() {
    let (setup, inside) = coarse_case();
    let dv = ideal_data(&setup.s, &chi(&inside));
    let inv = build_data_inverse(&dv, DEFAULT_EPS_ZETA).unwrap();
    let zeta = compute_zeta(&setup.s, &inv).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for n in (0..setup.grid.n_pixels()).filter(|&n| inside[n]) {
        for j in 0..16 {
            let energy = setup.s.matrix[(j * 16 + j, n)];
            worst = worst.max((zeta[(j, n)].abs() - energy) / energy);
        }
    }
    assert!(worst <= 1e-6, "max relative violation {worst}");
}

#[test]
fn cauchy_schwarz_property() {
    let (setup, inside) = coarse_case();
    let dv = ideal_data(&setup.s, &chi(&inside));
    let inv = build_data_inverse(&dv, DEFAULT_EPS_ZETA).unwrap();
    let zeta = compute_zeta(&setup.s, &inv).unwrap();
    let basis = inv.retained_basis();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pixels: Vec<usize> = (0..setup.grid.n_pixels()).step_by(9).collect();
    for &n in &pixels {
        for j in [0, 5, 11] {
            let phi = setup.s.block_column(j, n).into_owned();
            for _ in 0..100 {
                let g = DVector::from_fn(basis.ncols(), |_, _| rng.gen_range(-1.0..1.0));
                let h = &basis * g;
                // int_D |grad u_h|^2 = h^T dV h for ideal data.
                let energy = h.dot(&(&dv * &h));
                let lhs = h.dot(&phi).powi(2);
                assert!(lhs <= zeta[(j, n)] * energy * (1.0 + 1e-6) + 1e-300, "n={n} j={j}");
            }
        }
    }
}

#[test]
fn scaling_contrast_scales_zeta_inversely() {
    let (setup, inside) = coarse_case();
    let x = chi(&inside);
    let z1 = compute_zeta(&setup.s, &build_data_inverse(&ideal_data(&setup.s, &x), 1e-3).unwrap()).unwrap();
    let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let z2 = compute_zeta(&setup.s, &build_data_inverse(&ideal_data(&setup.s, &x2), 1e-3).unwrap()).unwrap();
    assert!((&z1 * 0.5 - &z2).amax() < 1e-10 * z1.amax());
}

#[test]
fn adjacent_data_null_direction_is_constant() {
    let setup = Setup::disc(2000, 1);
    let (_, _, data) = setup.simulate(&phantom(&[Anomaly::disc(Point::new(0.3, -0.2), 0.2, 1.0)]));
    let inv = build_data_inverse(&data.dv_mat, DEFAULT_EPS_ZETA).unwrap();
    let ones = DVector::from_element(16, 0.25);
    // Telescoping columns and reciprocity make the constant an exact null vector.
    assert!((&data.dv_mat * &ones).amax() < 1e-12 * data.dv_mat.amax());
    assert!(inv.retained < 16);
    assert!(inv.retained_basis().tr_mul(&ones).amax() < 1e-8);
    assert!(inv.apply(&ones).amax() < 1e-6 * inv.matrix().amax());
}

#[test]
fn weights_separate_inside_from_outside() {
    let setup = Setup::disc(4128, 800);
    for anomaly in [Anomaly::disc(Point::new(0.4, 0.2), 0.2, 1.0), Anomaly::disc(Point::new(-0.2, -0.3), 0.25, -0.5)] {
        let p = phantom(&[anomaly]);
        let (_, _, data) = setup.simulate(&p);
        let inv = build_data_inverse(&data.dv_mat, DEFAULT_EPS_ZETA).unwrap();
        let field = SfmIndexField::compute(&setup.s, &inv).unwrap();
        assert!(field.w.iter().all(|w| w.is_finite() && *w >= 0.0));
        let inside = setup.grid.select(|q| p.is_inside_anomaly(q));
        let mean = |flag: bool| {
            let v: Vec<f64> = field.w.iter().zip(&inside).filter(|(_, &i)| i == flag).map(|(w, _)| *w).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean(true) < mean(false), "inside {} outside {}", mean(true), mean(false));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn data_inverse_is_linear_and_symmetric(
        entries in proptest::collection::vec(-1.0f64..1.0, 36),
        x in proptest::collection::vec(-1.0f64..1.0, 6),
        y in proptest::collection::vec(-1.0f64..1.0, 6),
        a in -3.0f64..3.0,
    ) {
        let m = DMatrix::from_column_slice(6, 6, &entries);
        let inv = build_data_inverse(&m, 1e-3).unwrap();
        let (x, y) = (DVector::from_vec(x), DVector::from_vec(y));
        let scale = inv.matrix().amax().max(1.0) * 1e-9;
        prop_assert!((inv.apply(&(&x * a + &y)) - (inv.apply(&x) * a + inv.apply(&y))).amax() < scale * 10.0);
        prop_assert!((y.dot(&inv.apply(&x)) - x.dot(&inv.apply(&y))).abs() < scale * 10.0);
        // Reference formula over the symmetrized eigenpairs.
        let sym = (&m + m.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        let top = eig.eigenvalues.amax();
        let mut expect = DVector::zeros(6);
        for i in 0..6 {
            let mu = eig.eigenvalues[i];
            if mu.abs() > 1e-3 * top {
                let e = eig.eigenvectors.column(i);
                expect += e * (e.dot(&x) / mu);
            }
        }
        prop_assert!((inv.apply(&x) - expect).amax() < scale * 10.0);
    }

    #[test]
    fn full_rank_symmetric_inverse(
        entries in proptest::collection::vec(-1.0f64..1.0, 25),
        x in proptest::collection::vec(-1.0f64..1.0, 5),
    ) {
        let b = DMatrix::from_column_slice(5, 5, &entries);
        let m = &b * b.transpose() + DMatrix::identity(5, 5);
        let inv = build_data_inverse(&m, 1e-6).unwrap();
        let x = DVector::from_vec(x);
        prop_assert!((inv.apply(&(&m * &x)) - &x).amax() < 1e-8);
    }

    #[test]
    fn weights_are_monotone_in_zeta(
        zeta in proptest::collection::vec(-5.0f64..5.0, 8),
        bump in 0.0f64..3.0,
        j in 0usize..2,
        n in 0usize..4,
    ) {
        let s = SensitivityMatrix { matrix: DMatrix::from_fn(4, 4, |i, k| 0.5 + ((i * 4 + k) as f64).sin().abs()), n_electrodes: 2 };
        let z = DMatrix::from_column_slice(2, 4, &zeta);
        let w = compute_weights(&z, &s).unwrap();
        prop_assert!(w.iter().all(|v| v.is_finite() && *v >= 0.0));
        let mut z2 = z.clone();
        z2[(j, n)] = z[(j, n)].signum() * (z[(j, n)].abs() + bump);
        let w2 = compute_weights(&z2, &s).unwrap();
        prop_assert!(w2[n] >= w[n]);
        if bump > 0.0 {
            prop_assert!(w2[n] > w[n]);
        }
    }
}
