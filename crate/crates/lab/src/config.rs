//! TOML experiment configuration. Every field has a default, unknown keys
//! are rejected and all ranges are checked by [`ExperimentConfig::validate`]
//! before any computation starts.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use eit_core::geom::{Point, Polygon};
use eit_core::phantom::{Anomaly, Phantom, Shape};
use eit_core::recon::{DEFAULT_ALPHA, DEFAULT_RHO, DEFAULT_T0};
use eit_core::sfm::DEFAULT_EPS_ZETA;
use eit_core::{Method, T2Rule};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::heatmap::DEFAULT_SCALE;
use crate::io::read_file;
use crate::suite;

/// Clearance required between an anomaly and the domain boundary.
pub const INTERIOR_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    /// Phantom cases; the built-in suite when omitted.
    pub cases: Vec<CaseSpec>,
    pub noise: NoiseConfig,
    pub method: MethodConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: DomainConfig::default(),
            cases: suite::default_suite(),
            noise: NoiseConfig::default(),
            method: MethodConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// Unit disc.
    Disc,
    /// `r(t) = 1 + amplitude * cos(2t)`.
    Deformed,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Disc => "disc",
            DomainKind::Deformed => "deformed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub disc_elements: usize,
    pub deformed_elements: usize,
    pub disc_pixels: usize,
    pub deformed_pixels: usize,
    pub electrodes: usize,
    /// Gap between the pixel region and the boundary, in mean boundary edges.
    pub margin_edges: f64,
    pub deformation_amplitude: f64,
    /// Background conductivity.
    pub sigma0: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            disc_elements: 4128,
            deformed_elements: 4432,
            disc_pixels: 1414,
            deformed_pixels: 1424,
            electrodes: 16,
            margin_edges: eit_core::pixels::DEFAULT_MARGIN_EDGES,
            deformation_amplitude: 0.15,
            sigma0: 1.0,
        }
    }
}

impl DomainConfig {
    pub fn elements(&self, kind: DomainKind) -> usize {
        match kind {
            DomainKind::Disc => self.disc_elements,
            DomainKind::Deformed => self.deformed_elements,
        }
    }

    pub fn pixels(&self, kind: DomainKind) -> usize {
        match kind {
            DomainKind::Disc => self.disc_pixels,
            DomainKind::Deformed => self.deformed_pixels,
        }
    }

    /// Boundary radius as a function of the polar angle.
    pub fn radius(&self, kind: DomainKind, t: f64) -> f64 {
        match kind {
            DomainKind::Disc => 1.0,
            DomainKind::Deformed => 1.0 + self.deformation_amplitude * (2.0 * t).cos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub name: String,
    pub domain: DomainKind,
    #[serde(default)]
    pub anomalies: Vec<AnomalySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnomalySpec {
    Disc {
        center: [f64; 2],
        radius: f64,
        contrast: f64,
    },
    /// Counterclockwise vertices.
    Polygon {
        vertices: Vec<[f64; 2]>,
        contrast: f64,
    },
}

impl AnomalySpec {
    pub fn contrast(&self) -> f64 {
        match self {
            AnomalySpec::Disc { contrast, .. } | AnomalySpec::Polygon { contrast, .. } => *contrast,
        }
    }

    pub fn to_anomaly(&self) -> Anomaly {
        match self {
            AnomalySpec::Disc { center, radius, contrast } => {
                Anomaly::disc(Point::new(center[0], center[1]), *radius, *contrast)
            }
            AnomalySpec::Polygon { vertices, contrast } => Anomaly {
                shape: Shape::Polygon(Polygon::new(vertices.iter().map(|v| Point::new(v[0], v[1])).collect())),
                contrast: *contrast,
            },
        }
    }

    /// Points on the anomaly outline used for the containment check.
    fn outline(&self) -> Vec<Point> {
        match self {
            AnomalySpec::Disc { center, radius, .. } => (0..64)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / 64.0;
                    Point::new(center[0] + radius * t.cos(), center[1] + radius * t.sin())
                })
                .collect(),
            AnomalySpec::Polygon { vertices, .. } => vertices.iter().map(|v| Point::new(v[0], v[1])).collect(),
        }
    }
}

impl CaseSpec {
    pub fn phantom(&self, sigma0: f64) -> Phantom {
        let mut p = Phantom::homogeneous(sigma0);
        p.interior_margin = INTERIOR_MARGIN;
        self.anomalies.iter().fold(p, |p, a| p.with_anomaly(a.to_anomaly()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Noise levels as fractions of `max |dV|`.
    pub levels: Vec<f64>,
    /// Base seed; each case and level derives its own stream from it.
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { levels: vec![0.0, 0.01, 0.05], seed: 20240531 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum T2Choice {
    Formula,
    UpperThird,
    Fixed(usize),
}

impl T2Choice {
    pub fn rule(self) -> T2Rule {
        match self {
            T2Choice::Formula => T2Rule::Formula,
            T2Choice::UpperThird => T2Rule::UpperThird,
            T2Choice::Fixed(t) => T2Rule::Fixed(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodConfig {
    /// Any of `S`, `B`, `A`, `W1`.
    pub methods: Vec<String>,
    pub t0: usize,
    pub alpha: f64,
    /// `lambda_1(S) / max(w)` when omitted.
    pub beta: Option<f64>,
    pub eps_zeta: f64,
    /// Relative singular value threshold for the truncation of `B`.
    pub rho: f64,
    pub t2_rule: T2Choice,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            methods: Method::ALL.iter().map(|m| m.name().to_string()).collect(),
            t0: DEFAULT_T0,
            alpha: DEFAULT_ALPHA,
            beta: None,
            eps_zeta: DEFAULT_EPS_ZETA,
            rho: DEFAULT_RHO,
            t2_rule: T2Choice::Formula,
        }
    }
}

impl MethodConfig {
    pub fn parsed_methods(&self) -> Result<Vec<Method>> {
        self.methods
            .iter()
            .map(|m| Method::parse(m).ok_or_else(|| LabError::Config(format!("unknown method `{m}`"))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write PNG heatmaps next to the CSV files.
    pub images: bool,
    pub image_scale: u32,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), images: true, image_scale: DEFAULT_SCALE }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(LabError::Config(msg()))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_file(path)?).map_err(|e| match e {
            LabError::Config(msg) => LabError::Config(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    /// The configuration as TOML, including the resolved defaults.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        self.method.parsed_methods()
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        for kind in [DomainKind::Disc, DomainKind::Deformed] {
            check(d.elements(kind) >= 50, || format!("{} elements must be at least 50", kind.name()))?;
            check(d.pixels(kind) >= 1, || format!("{} pixels must be positive", kind.name()))?;
        }
        check(d.electrodes >= 3, || format!("electrodes must be at least 3, got {}", d.electrodes))?;
        check(d.margin_edges.is_finite() && d.margin_edges >= 0.0, || {
            format!("margin_edges must be nonnegative, got {}", d.margin_edges)
        })?;
        check((0.0..0.5).contains(&d.deformation_amplitude), || {
            format!("deformation_amplitude must lie in [0, 0.5), got {}", d.deformation_amplitude)
        })?;
        check(d.sigma0.is_finite() && d.sigma0 > 0.0, || format!("sigma0 must be positive, got {}", d.sigma0))?;

        check(!self.cases.is_empty(), || "at least one case is required".into())?;
        for (i, case) in self.cases.iter().enumerate() {
            self.validate_case(case)?;
            check(!self.cases[..i].iter().any(|c| c.name == case.name), || format!("duplicate case `{}`", case.name))?;
        }

        let n = &self.noise;
        check(!n.levels.is_empty(), || "at least one noise level is required".into())?;
        for (i, &l) in n.levels.iter().enumerate() {
            check(l.is_finite() && (0.0..1.0).contains(&l), || format!("noise level {l} outside [0, 1)"))?;
            check(!n.levels[..i].contains(&l), || format!("duplicate noise level {l}"))?;
        }

        let m = &self.method;
        let methods = m.parsed_methods()?;
        check(!methods.is_empty(), || "at least one method is required".into())?;
        for (i, x) in methods.iter().enumerate() {
            check(!methods[..i].contains(x), || format!("duplicate method `{}`", x.name()))?;
        }
        check(m.t0 >= 1, || "t0 must be positive".into())?;
        check(m.alpha.is_finite() && m.alpha >= 0.0, || format!("alpha must be nonnegative, got {}", m.alpha))?;
        if let Some(b) = m.beta {
            check(b.is_finite() && b >= 0.0, || format!("beta must be nonnegative, got {b}"))?;
        }
        check((0.0..1.0).contains(&m.eps_zeta), || format!("eps_zeta must lie in [0, 1), got {}", m.eps_zeta))?;
        check(m.rho > 0.0 && m.rho < 1.0, || format!("rho must lie in (0, 1), got {}", m.rho))?;
        if let T2Choice::Fixed(t) = m.t2_rule {
            check(t >= 1, || "fixed t2 must be positive".into())?;
        }
        check((1..=64).contains(&self.output.image_scale), || {
            format!("image_scale must lie in [1, 64], got {}", self.output.image_scale)
        })?;
        Ok(())
    }

    fn validate_case(&self, case: &CaseSpec) -> Result<()> {
        let name_ok =
            !case.name.is_empty() && case.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        check(name_ok, || format!("case name `{}` must be nonempty ASCII letters, digits, `-` or `_`", case.name))?;
        let mut lowest = self.domain.sigma0;
        for (i, a) in case.anomalies.iter().enumerate() {
            let ctx = || format!("case `{}` anomaly {i}", case.name);
            check(a.contrast().is_finite() && a.contrast() != 0.0, || format!("{}: contrast must be nonzero", ctx()))?;
            lowest += a.contrast().min(0.0);
            match a {
                AnomalySpec::Disc { center, radius, .. } => {
                    check(center.iter().all(|c| c.is_finite()), || format!("{}: center must be finite", ctx()))?;
                    check(radius.is_finite() && *radius > 0.0, || format!("{}: radius must be positive", ctx()))?;
                }
                AnomalySpec::Polygon { vertices, .. } => {
                    check(vertices.len() >= 3, || format!("{}: polygon needs 3 vertices", ctx()))?;
                    check(vertices.iter().flatten().all(|c| c.is_finite()), || {
                        format!("{}: vertices must be finite", ctx())
                    })?;
                    let area = Polygon::new(vertices.iter().map(|v| Point::new(v[0], v[1])).collect()).signed_area();
                    check(area > 0.0, || format!("{}: polygon must be counterclockwise", ctx()))?;
                }
            }
            for p in a.outline() {
                let clearance = self.domain.radius(case.domain, p.y.atan2(p.x)) - p.norm();
                check(clearance >= INTERIOR_MARGIN, || {
                    format!("{}: point ({:.3}, {:.3}) is within {INTERIOR_MARGIN} of the boundary", ctx(), p.x, p.y)
                })?;
            }
        }
        check(lowest > 0.0, || format!("case `{}`: conductivity can reach {lowest}", case.name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.cases.len(), 8);
        assert_eq!(cfg.methods().unwrap(), Method::ALL.to_vec());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn parses_sections() {
        let text = r#"
            [domain]
            disc_elements = 600
            [noise]
            levels = [0.0, 0.02]
            seed = 7
            [method]
            methods = ["s", "A"]
            t2_rule = { fixed = 40 }
            [[cases]]
            name = "one"
            domain = "disc"
            anomalies = [
                { shape = "disc", center = [0.3, 0.1], radius = 0.2, contrast = 1.0 },
                { shape = "polygon", vertices = [[-0.5, -0.2], [-0.2, -0.2], [-0.3, 0.1]], contrast = -0.5 },
            ]
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.domain.disc_elements, 600);
        assert_eq!(cfg.domain.deformed_elements, 4432);
        assert_eq!(cfg.methods().unwrap(), vec![Method::S, Method::A]);
        assert_eq!(cfg.method.t2_rule.rule(), T2Rule::Fixed(40));
        assert_eq!(cfg.cases.len(), 1);
        assert_eq!(cfg.cases[0].phantom(1.0).anomalies.len(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            "[domain]\nelectrods = 16",
            "[noise]\nlevels = [1.5]",
            "[noise]\nlevels = []",
            "[method]\nmethods = [\"X\"]",
            "[method]\nmethods = [\"S\", \"s\"]",
            "[method]\nalpha = -1.0",
            "[method]\nrho = 0.0",
            "[output]\nimage_scale = 0",
            "[[cases]]\nname = \"edge\"\ndomain = \"disc\"\nanomalies = [{ shape = \"disc\", center = [0.9, 0.0], radius = 0.1, contrast = 1.0 }]",
            "[[cases]]\nname = \"neg\"\ndomain = \"disc\"\nanomalies = [{ shape = \"disc\", center = [0.0, 0.0], radius = 0.1, contrast = -1.0 }]",
            "[[cases]]\nname = \"bad name\"\ndomain = \"disc\"",
            "[[cases]]\nname = \"cw\"\ndomain = \"disc\"\nanomalies = [{ shape = \"polygon\", vertices = [[0.0, 0.0], [0.0, 0.2], [0.2, 0.0]], contrast = 1.0 }]",
        ];
        for text in bad {
            assert!(matches!(ExperimentConfig::from_toml(text), Err(LabError::Config(_))), "accepted: {text}");
        }
    }

    #[test]
    fn deformed_containment_uses_the_boundary() {
        // Inside the unit disc but outside r = 1 - 0.15 at t = pi/2.
        let text = "[[cases]]\nname = \"top\"\ndomain = \"deformed\"\nanomalies = [{ shape = \"disc\", center = [0.0, 0.62], radius = 0.2, contrast = 1.0 }]";
        assert!(ExperimentConfig::from_toml(text).is_err());
        assert!(ExperimentConfig::from_toml(&text.replace("deformed", "disc")).is_ok());
    }
}
