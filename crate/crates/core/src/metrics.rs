//! Localization metrics of a pixel image against the true anomalies.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DVector;

use crate::geom::Point;
use crate::phantom::Phantom;
use crate::pixels::PixelGrid;
use crate::sensitivity::SensitivityMatrix;

/// Metric values; `None` marks a metric that is undefined for the input,
/// e.g. any support metric of an empty phantom or a zero image.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    /// Distance between the centroid of the sign-aligned positive part of
    /// the image and the centroid of the dominant-sign anomalies.
    pub centroid_error: Option<f64>,
    /// Jaccard index of the half-max support of `|x|` and the true support.
    pub support_jaccard: Option<f64>,
    /// Fraction of the `|x|` mass outside the true support dilated by one
    /// pixel (8-neighbourhood).
    pub ringing_energy: Option<f64>,
    /// `|S x - dV| / |dV|`.
    pub relative_data_misfit: Option<f64>,
}

impl Metrics {
    pub fn evaluate(
        x: &[f64],
        grid: &PixelGrid,
        phantom: &Phantom,
        s: Option<(&SensitivityMatrix, &DVector<f64>)>,
    ) -> Self {
        let truth = grid.select(|p| phantom.is_inside_anomaly(p));
        Metrics {
            centroid_error: centroid_error(x, grid, phantom),
            support_jaccard: support_jaccard(x, &truth),
            ringing_energy: ringing_energy(x, grid, &truth),
            relative_data_misfit: s.and_then(|(s, dv)| relative_data_misfit(x, s, dv)),
        }
    }
}

/// Sign of the anomaly set with the largest `|contrast| * area`, and the
/// area-weighted centroid of the anomalies with that sign.
pub fn dominant_anomaly(phantom: &Phantom) -> Option<(f64, Point)> {
    let mut mass = [0.0f64; 2];
    for a in &phantom.anomalies {
        mass[usize::from(a.contrast < 0.0)] += a.contrast.abs() * a.shape.area();
    }
    if mass[0] == 0.0 && mass[1] == 0.0 {
        return None;
    }
    let sign = if mass[0] >= mass[1] { 1.0 } else { -1.0 };
    let (mut total, mut c) = (0.0, Point::default());
    for a in phantom.anomalies.iter().filter(|a| a.contrast * sign > 0.0) {
        let area = a.shape.area();
        total += area;
        c = c + a.shape.centroid() * area;
    }
    Some((sign, c * (1.0 / total)))
}

pub fn centroid_error(x: &[f64], grid: &PixelGrid, phantom: &Phantom) -> Option<f64> {
    let (sign, truth) = dominant_anomaly(phantom)?;
    let (mut total, mut c) = (0.0, Point::default());
    for (v, px) in x.iter().zip(&grid.pixels) {
        let m = (sign * v).max(0.0) * px.area;
        total += m;
        c = c + px.centroid * m;
    }
    (total > 0.0).then(|| (c * (1.0 / total)).distance(truth))
}

/// Pixels with `|x_n| >= max |x| / 2`.
pub fn half_max_support(x: &[f64]) -> Option<Vec<bool>> {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (peak > 0.0).then(|| x.iter().map(|v| v.abs() >= 0.5 * peak).collect())
}

pub fn support_jaccard(x: &[f64], truth: &[bool]) -> Option<f64> {
    if !truth.iter().any(|&t| t) {
        return None;
    }
    let support = half_max_support(x)?;
    let inter = support.iter().zip(truth).filter(|(a, b)| **a && **b).count();
    let union = support.iter().zip(truth).filter(|(a, b)| **a || **b).count();
    Some(inter as f64 / union as f64)
}

/// `mask` grown by one pixel in the 8-neighbourhood.
pub fn dilate(mask: &[bool], grid: &PixelGrid) -> Vec<bool> {
    let mut out = mask.to_vec();
    for (n, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        for k in grid.neighbors(n, true) {
            out[k] = true;
        }
    }
    out
}

pub fn ringing_energy(x: &[f64], grid: &PixelGrid, truth: &[bool]) -> Option<f64> {
    if !truth.iter().any(|&t| t) {
        return None;
    }
    let grown = dilate(truth, grid);
    let (mut total, mut outside) = (0.0, 0.0);
    for ((v, px), inside) in x.iter().zip(&grid.pixels).zip(&grown) {
        let m = v.abs() * px.area;
        total += m;
        if !inside {
            outside += m;
        }
    }
    (total > 0.0).then(|| outside / total)
}

pub fn relative_data_misfit(x: &[f64], s: &SensitivityMatrix, dv: &DVector<f64>) -> Option<f64> {
    let norm = dv.norm();
    if norm == 0.0 || x.len() != s.n_pixels() {
        return None;
    }
    Some((s.apply(&DVector::from_column_slice(x)) - dv).norm() / norm)
}

/// A 4-connected set of same-sign pixels above half of `max |x|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub sign: f64,
    pub pixels: Vec<usize>,
}

pub fn half_max_components(x: &[f64], grid: &PixelGrid) -> Vec<Component> {
    let Some(support) = half_max_support(x) else {
        return Vec::new();
    };
    let mut seen = vec![false; x.len()];
    let mut out = Vec::new();
    for start in 0..x.len() {
        if !support[start] || seen[start] {
            continue;
        }
        let sign = x[start].signum();
        let mut stack = vec![start];
        let mut pixels = Vec::new();
        seen[start] = true;
        while let Some(n) = stack.pop() {
            pixels.push(n);
            for k in grid.neighbors(n, false) {
                if support[k] && !seen[k] && x[k].signum() == sign {
                    seen[k] = true;
                    stack.push(k);
                }
            }
        }
        pixels.sort_unstable();
        out.push(Component { sign, pixels });
    }
    out
}
