use std::path::Path;

use eit_core::metrics::half_max_components;
use eit_core::{Method, TruncationRule};
use eit_lab::config::{AnomalySpec, CaseSpec, DomainKind};
use eit_lab::experiment::{run_pipeline, summarize};
use eit_lab::io;
use eit_lab::{ExperimentConfig, LabError, Stage};

fn small_config(dir: &Path, cases: &[&str]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.domain.disc_elements = 1500;
    cfg.domain.deformed_elements = 1500;
    cfg.domain.disc_pixels = 400;
    cfg.domain.deformed_pixels = 400;
    cfg.cases.retain(|c| cases.contains(&c.name.as_str()));
    cfg.noise.levels = vec![0.0];
    cfg.output.dir = dir.to_path_buf();
    cfg.output.images = false;
    cfg
}

#[test]
fn empty_phantom_gives_zero_images_and_undefined_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), &[]);
    cfg.cases = vec![CaseSpec { name: "empty".into(), domain: DomainKind::Disc, anomalies: vec![] }];
    cfg.output.images = true;
    let bundle = run_pipeline(&cfg, Stage::Metrics).unwrap();
    assert_eq!(bundle.records.len(), Method::ALL.len());
    for r in &bundle.records {
        assert!(r.result.delta_sigma.iter().all(|&x| x == 0.0), "{:?}", r.method());
        let m = r.metrics;
        assert_eq!(
            (m.centroid_error, m.support_jaccard, m.ringing_energy, m.relative_data_misfit),
            (None, None, None, None)
        );
    }
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with("NA,NA,NA,NA")));
    assert!(dir.path().join("empty/noise_0/A.png").exists());
}

#[test]
fn single_disc_ordering_and_shared_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), &["a"]);
    let bundle = run_pipeline(&cfg, Stage::Metrics).unwrap();
    let (a, s) = (bundle.record("a", 0.0, Method::A).unwrap(), bundle.record("a", 0.0, Method::S).unwrap());
    assert!(a.metrics.support_jaccard.unwrap() >= s.metrics.support_jaccard.unwrap());
    assert!(a.metrics.ringing_energy.unwrap() < s.metrics.ringing_energy.unwrap());

    // Every method consumed the one synthesized data set.
    let run = bundle.run("a", 0.0).unwrap();
    let system = bundle.context(DomainKind::Disc).unwrap().system().unwrap();
    assert_eq!(s.result.delta_sigma, system.reconstruct_s(&run.data, cfg.method.t0).unwrap().delta_sigma);
    let w = run.w.as_ref().unwrap();
    let beta = system.default_beta(w).unwrap();
    let b = system.reconstruct_b(&run.data, w, beta, TruncationRule::Relative(cfg.method.rho)).unwrap();
    assert_eq!(bundle.record("a", 0.0, Method::B).unwrap().result.delta_sigma, b.delta_sigma);
    assert_eq!(&bundle.record("a", 0.0, Method::W1).unwrap().result.delta_sigma, w);

    // Files on disk match the in-memory results.
    let text = std::fs::read_to_string(dir.path().join("a/noise_0/difference.txt")).unwrap();
    assert_eq!(io::parse_difference(Path::new("difference.txt"), &text).unwrap(), run.data);
    let sens = std::fs::read(dir.path().join("disc/sensitivity.bin")).unwrap();
    assert_eq!(io::decode_sensitivity(Path::new("s.bin"), &sens).unwrap(), system.s);
    let resolved = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(resolved, cfg);
}

#[test]
fn two_signed_anomalies_give_two_blobs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), &["b"]);
    cfg.method.methods = vec!["A".into()];
    let bundle = run_pipeline(&cfg, Stage::Metrics).unwrap();
    let grid = &bundle.context(DomainKind::Disc).unwrap().grid;
    let x = &bundle.record("b", 0.0, Method::A).unwrap().result.delta_sigma;
    let comps = half_max_components(x, grid);
    let positive: Vec<_> = comps.iter().filter(|c| c.sign > 0.0).collect();
    let negative: Vec<_> = comps.iter().filter(|c| c.sign < 0.0).collect();
    assert_eq!((positive.len(), negative.len()), (1, 1), "{comps:?}");
    // The positive blob sits on the conductive anomaly at (0.45, 0.2).
    let c = &grid.pixels[positive[0].pixels[0]].centroid;
    assert!(c.x > 0.0, "{c:?}");
}

#[test]
fn summary_has_one_row_per_case_level_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), &["a", "c"]);
    cfg.domain.disc_elements = 600;
    cfg.domain.disc_pixels = 150;
    cfg.noise.levels = vec![0.0, 0.01, 0.05];
    cfg.method.methods = vec!["S".into(), "W1".into()];
    let bundle = run_pipeline(&cfg, Stage::Metrics).unwrap();
    assert_eq!(bundle.records.len(), 2 * 3 * 2);
    let (csv, txt) = summarize(&bundle.records);
    assert_eq!(csv.lines().count(), 1 + 12);
    assert_eq!(std::fs::read_to_string(dir.path().join("summary.csv")).unwrap(), csv);
    assert_eq!(std::fs::read_to_string(dir.path().join("summary.txt")).unwrap(), txt);
    // Noisy runs record their derived seeds.
    let noisy = bundle.record("c", 0.05, Method::S).unwrap();
    assert_eq!(noisy.result.seed, Some(noisy.seed));
    assert_eq!(noisy.result.noise_level, 0.05);
}

#[test]
fn early_stages_write_only_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), &["e"]);
    cfg.domain.deformed_elements = 600;
    cfg.domain.deformed_pixels = 150;
    let bundle = run_pipeline(&cfg, Stage::Sense).unwrap();
    assert!(bundle.records.is_empty());
    let root = dir.path();
    for f in ["deformed/mesh.txt", "deformed/pixels.txt", "deformed/sensitivity.txt", "e/noise_0/difference.txt"] {
        assert!(root.join(f).exists(), "{f}");
    }
    assert!(!root.join("e/noise_0/w.csv").exists());
    assert!(!root.join("disc").exists());
    let text = std::fs::read_to_string(root.join("deformed/sensitivity.txt")).unwrap();
    let s = io::parse_sensitivity(Path::new("s.txt"), &text).unwrap();
    assert_eq!(&s, bundle.context(DomainKind::Deformed).unwrap().sensitivity().unwrap());
    let mesh_text = std::fs::read_to_string(root.join("deformed/mesh.txt")).unwrap();
    let (mesh, _) = io::parse_mesh(Path::new("mesh.txt"), &mesh_text).unwrap();
    assert_eq!(mesh, bundle.context(DomainKind::Deformed).unwrap().mesh);
}

#[test]
fn errors_carry_their_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), &["a"]);
    cfg.domain.disc_elements = 60;
    cfg.domain.electrodes = 400;
    let err = run_pipeline(&cfg, Stage::Mesh).unwrap_err();
    assert_eq!(err.stage(), Some(Stage::Mesh), "{err}");
    assert!(err.to_string().starts_with("[mesh]"), "{err}");

    let mut cfg = small_config(dir.path(), &["a"]);
    cfg.cases[0].anomalies.push(AnomalySpec::Disc { center: [0.0, 0.0], radius: 2.0, contrast: 1.0 });
    let err = run_pipeline(&cfg, Stage::Mesh).unwrap_err();
    assert_eq!(err.stage(), Some(Stage::Config), "{err}");
    assert!(matches!(err, LabError::Stage { source, .. } if matches!(*source, LabError::Config(_))));
}
