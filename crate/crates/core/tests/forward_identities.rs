mod common;

use common::*;
use eit_core::forward::add_noise;
use eit_core::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn contrast_weights(sigma: &[f64]) -> Vec<f64> {
    sigma.iter().map(|s| s - 1.0).collect()
}

#[test]
fn galerkin_identity_on_disc_and_deformed_phantoms() {
    let square = Polygon::new(vec![
        Point::new(-0.3, -0.5),
        Point::new(0.0, -0.5),
        Point::new(0.0, -0.2),
        Point::new(-0.3, -0.2),
    ]);
    let cases = [
        vec![Anomaly::disc(Point::new(0.4, 0.0), 0.2, 1.0)],
        vec![Anomaly::disc(Point::new(0.3, 0.3), 0.2, 1.0), Anomaly::disc(Point::new(-0.4, -0.2), 0.15, -0.5)],
        vec![Anomaly { shape: Shape::Polygon(square), contrast: 2.0 }],
    ];
    for setup in [Setup::disc(2000, 100), Setup::deformed(2000, 100)] {
        for anomalies in &cases {
            let (sigma, u, data) = setup.simulate(&phantom(anomalies));
            let oracle = oracle_cross_integrals(&setup.mesh, &contrast_weights(&sigma), &u, &setup.u0);
            let err = rel_err(&data.dv_mat, &oracle);
            assert!(err < 1e-9, "identity error {err}");
            assert!(data.dv_mat.amax() > 0.0);
        }
    }
}

#[test]
fn homogeneous_disc_is_rotation_invariant() {
    let setup = Setup::disc(4128, 1);
    let v = &setup.v0.v;
    let n = 16;
    let mut worst = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            worst = worst.max((v[(k, j)] - v[((k + 1) % n, (j + 1) % n)]).abs());
        }
    }
    assert!(worst / v.amax() < 1e-2, "rotation asymmetry {}", worst / v.amax());
    assert!(setup.v0.reciprocity_error() < 1e-8);
}

#[test]
fn linearization_error_is_first_order() {
    let setup = Setup::disc(2000, 100);
    let mut errors = Vec::new();
    for contrast in [0.2, 0.1, 0.05] {
        let (sigma, _, data) = setup.simulate(&phantom(&[Anomaly::disc(Point::new(0.3, 0.2), 0.25, contrast)]));
        let linear = oracle_cross_integrals(&setup.mesh, &contrast_weights(&sigma), &setup.u0, &setup.u0);
        errors.push((&data.dv_mat - &linear).norm() / data.dv_mat.norm());
    }
    for pair in errors.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((1.6..2.4).contains(&ratio), "errors {errors:?}");
    }
}

#[test]
fn noise_statistics() {
    let n = 100;
    let clean = DifferenceData::from_matrix(DMatrix::from_fn(n, n, |i, j| ((i * n + j) as f64 * 0.37).sin()));
    let amax = clean.dv_vec.amax();
    let level = 0.01;
    let noisy = add_noise(&clean, level, 42).unwrap();
    let d = &noisy.dv_vec - &clean.dv_vec;
    let count = d.len() as f64;
    let scale = level * amax;
    assert!(d.amax() <= scale * (1.0 + 1e-12));
    let mean = d.sum() / count;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / count;
    // U[-s, s] has variance s^2 / 3; the sample mean has std s / sqrt(3 N).
    assert!(mean.abs() < 4.0 * scale / (3.0 * count).sqrt(), "mean {mean}");
    assert!((var / (scale * scale / 3.0) - 1.0).abs() < 0.05, "var {var}");
    assert_eq!(noisy, add_noise(&clean, level, 42).unwrap());
    assert_ne!(noisy, add_noise(&clean, level, 43).unwrap());
    assert_eq!(add_noise(&clean, 0.0, 42).unwrap(), clean);
    assert_eq!(noisy.noise_level, level);
    assert_eq!(noisy.seed, Some(42));
    assert!(add_noise(&clean, -0.1, 1).is_err());
    for j in 0..n {
        assert_eq!(noisy.dv_mat.column(j).as_slice(), &noisy.dv_vec.as_slice()[j * n..(j + 1) * n]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn identity_and_reciprocity_for_random_discs(
        r in 0.0f64..0.5,
        theta in 0.0f64..std::f64::consts::TAU,
        radius in 0.08f64..0.3,
        contrast in prop_oneof![-0.6f64..-0.1, 0.1f64..2.0],
    ) {
        let setup = Setup::disc(600, 1);
        let center = Point::new(r * theta.cos(), r * theta.sin());
        let p = phantom(&[Anomaly::disc(center, radius, contrast)]);
        prop_assume!(p.validate(&setup.mesh).is_ok());
        let (sigma, u, data) = setup.simulate(&p);
        prop_assume!(sigma.iter().any(|&s| s != 1.0));
        let oracle = oracle_cross_integrals(&setup.mesh, &contrast_weights(&sigma), &u, &setup.u0);
        prop_assert!(rel_err(&data.dv_mat, &oracle) < 1e-9);
        let v = measure_voltages(&u, &setup.layout, "m");
        prop_assert!(v.reciprocity_error() < 1e-8);
        for j in 0..16 {
            prop_assert!(v.v.column(j).sum().abs() < 1e-12 * v.v.amax());
        }
        // A conductivity increase lowers the voltages and vice versa.
        let trace: f64 = (0..16).map(|j| data.dv_mat[(j, j)]).sum();
        prop_assert!(trace * contrast > 0.0);
    }
}
