//! Built-in phantom suite: four cases on the unit disc and four analogous
//! cases on the deformed domain, with one to three anomalies of contrast
//! `+1` (conductive) or `-0.5` (resistive).

use crate::config::{AnomalySpec, CaseSpec, DomainKind};

pub const CONDUCTIVE: f64 = 1.0;
pub const RESISTIVE: f64 = -0.5;

fn disc(x: f64, y: f64, radius: f64, contrast: f64) -> AnomalySpec {
    AnomalySpec::Disc { center: [x, y], radius, contrast }
}

fn case(name: &str, domain: DomainKind, anomalies: Vec<AnomalySpec>) -> CaseSpec {
    CaseSpec { name: name.into(), domain, anomalies }
}

pub fn default_suite() -> Vec<CaseSpec> {
    use DomainKind::{Deformed, Disc};
    vec![
        case("a", Disc, vec![disc(0.4, 0.2, 0.2, CONDUCTIVE)]),
        case("b", Disc, vec![disc(0.45, 0.2, 0.18, CONDUCTIVE), disc(-0.4, -0.3, 0.2, RESISTIVE)]),
        case("c", Disc, vec![disc(-0.1, 0.35, 0.22, RESISTIVE)]),
        case(
            "d",
            Disc,
            vec![
                disc(0.0, 0.45, 0.15, CONDUCTIVE),
                disc(-0.4, -0.25, 0.15, CONDUCTIVE),
                disc(0.4, -0.3, 0.15, RESISTIVE),
            ],
        ),
        case("e", Deformed, vec![disc(0.5, 0.1, 0.2, CONDUCTIVE)]),
        case("f", Deformed, vec![disc(0.55, 0.15, 0.18, CONDUCTIVE), disc(-0.5, -0.2, 0.2, RESISTIVE)]),
        case("g", Deformed, vec![disc(-0.1, 0.3, 0.2, RESISTIVE)]),
        case(
            "h",
            Deformed,
            vec![
                disc(0.55, 0.2, 0.15, CONDUCTIVE),
                disc(-0.5, 0.2, 0.15, RESISTIVE),
                AnomalySpec::Polygon {
                    vertices: vec![[-0.15, -0.55], [0.15, -0.55], [0.15, -0.3], [-0.15, -0.3]],
                    contrast: CONDUCTIVE,
                },
            ],
        ),
    ]
}

/// The suite case with the given name.
pub fn suite_case(name: &str) -> Option<CaseSpec> {
    default_suite().into_iter().find(|c| c.name == name)
}
