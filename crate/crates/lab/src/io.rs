//! Plain-text and binary file formats.
//!
//! All floats are written with 17 significant digits so text files
//! round-trip bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use eit_core::geom::Point;
use eit_core::mesh::{ElectrodeLayout, TriMesh};
use eit_core::pixels::PixelGrid;
use eit_core::{DifferenceData, ReconstructionResult, SensitivityMatrix, VoltageDataSet};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{LabError, Result};

/// Magic bytes of the binary sensitivity format.
pub const SENS_MAGIC: &[u8; 5] = b"SENS1";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| LabError::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| LabError::io(path, e))
}

/// Line-oriented reader that reports `path:line` on malformed input.
struct Lines<'a> {
    path: &'a Path,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Lines { path, iter: text.lines().enumerate(), line: 0 }
    }

    fn err(&self, reason: impl Into<String>) -> LabError {
        LabError::Parse { path: self.path.to_path_buf(), line: self.line, reason: reason.into() }
    }

    fn next_fields(&mut self) -> Result<Vec<&'a str>> {
        for (i, l) in self.iter.by_ref() {
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() && !l.starts_with('#') {
                return Ok(l.split_whitespace().collect());
            }
        }
        Err(self.err("unexpected end of file"))
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("cannot parse {s:?}")))
    }

    /// A record of exactly `n` fields whose first field is `index`.
    fn record(&mut self, index: usize, n: usize) -> Result<Vec<&'a str>> {
        let f = self.next_fields()?;
        if f.len() != n {
            return Err(self.err(format!("expected {n} fields, got {}", f.len())));
        }
        if self.parse::<usize>(f[0])? != index {
            return Err(self.err(format!("expected record {index}")));
        }
        Ok(f)
    }

    /// Header of `key value` pairs with the given keys in order.
    fn header(&mut self, keys: &[&str]) -> Result<Vec<&'a str>> {
        let f = self.next_fields()?;
        if f.len() != 2 * keys.len() || keys.iter().enumerate().any(|(i, k)| f[2 * i] != *k) {
            return Err(self.err(format!("expected header `{}`", keys.join(" <n> "))));
        }
        Ok(f.iter().skip(1).step_by(2).copied().collect())
    }
}

/// Mesh and electrodes: a header line with counts, then node records
/// `index x y`, triangle records `index n1 n2 n3`, the boundary loop as
/// `index node` and the electrodes as `index node`.
pub fn format_mesh(mesh: &TriMesh, layout: &ElectrodeLayout) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "nodes {} triangles {} boundary {} electrodes {}",
        mesh.n_nodes(),
        mesh.n_triangles(),
        mesh.boundary_nodes.len(),
        layout.n_electrodes()
    );
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{i} {} {}", num(p.x), num(p.y));
    }
    for (i, t) in mesh.triangles.iter().enumerate() {
        let _ = writeln!(s, "{i} {} {} {}", t[0], t[1], t[2]);
    }
    for (i, b) in mesh.boundary_nodes.iter().enumerate() {
        let _ = writeln!(s, "{i} {b}");
    }
    for (i, e) in layout.electrode_nodes.iter().enumerate() {
        let _ = writeln!(s, "{i} {e}");
    }
    s
}

pub fn parse_mesh(path: &Path, text: &str) -> Result<(TriMesh, ElectrodeLayout)> {
    let mut r = Lines::new(path, text);
    let h = r.header(&["nodes", "triangles", "boundary", "electrodes"])?;
    let counts: Vec<usize> = h.iter().map(|v| r.parse(v)).collect::<Result<_>>()?;
    let mut nodes = Vec::with_capacity(counts[0]);
    for i in 0..counts[0] {
        let f = r.record(i, 3)?;
        nodes.push(Point::new(r.parse(f[1])?, r.parse(f[2])?));
    }
    let mut triangles = Vec::with_capacity(counts[1]);
    for i in 0..counts[1] {
        let f = r.record(i, 4)?;
        triangles.push([r.parse(f[1])?, r.parse(f[2])?, r.parse(f[3])?]);
    }
    let mut boundary = Vec::with_capacity(counts[2]);
    for i in 0..counts[2] {
        let f = r.record(i, 2)?;
        boundary.push(r.parse(f[1])?);
    }
    let mut electrodes = Vec::with_capacity(counts[3]);
    for i in 0..counts[3] {
        let f = r.record(i, 2)?;
        electrodes.push(r.parse(f[1])?);
    }
    let mesh = TriMesh::new(nodes, triangles, boundary)?;
    Ok((mesh, ElectrodeLayout { electrode_nodes: electrodes }))
}

/// Pixel grid: a header with the lattice, then one record per pixel
/// `index area cx cy cells i1 j1 i2 j2 ...`.
pub fn format_pixel_grid(grid: &PixelGrid) -> String {
    let l = &grid.lattice;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "pixels {} nx {} ny {} spacing {} x0 {} y0 {}",
        grid.n_pixels(),
        l.nx,
        l.ny,
        num(l.spacing),
        num(l.origin.x),
        num(l.origin.y)
    );
    for (n, p) in grid.pixels.iter().enumerate() {
        let _ = write!(s, "{n} {} {} {} {}", num(p.area), num(p.centroid.x), num(p.centroid.y), p.cells.len());
        for (i, j) in &p.cells {
            let _ = write!(s, " {i} {j}");
        }
        s.push('\n');
    }
    s
}

fn format_matrix_rows(s: &mut String, m: &DMatrix<f64>) {
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| num(m[(r, c)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
}

fn parse_matrix_rows(r: &mut Lines<'_>, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        let f = r.next_fields()?;
        if f.len() != cols {
            return Err(r.err(format!("expected {cols} values, got {}", f.len())));
        }
        for (j, v) in f.iter().enumerate() {
            m[(i, j)] = r.parse(v)?;
        }
    }
    Ok(m)
}

fn seed_field(seed: Option<u64>) -> String {
    seed.map_or_else(|| "none".into(), |s| s.to_string())
}

/// Voltage matrix: header `n_e <n> noise_level 0 seed none`, then row `k`
/// holds `V_{j,k}` for `j = 0..n_e`.
pub fn format_voltages(v: &VoltageDataSet) -> String {
    let mut s = format!("n_e {} noise_level 0 seed none\n", v.n_electrodes());
    format_matrix_rows(&mut s, &v.v);
    s
}

/// Difference data in the voltage layout with its noise provenance.
pub fn format_difference(d: &DifferenceData) -> String {
    let mut s = format!("n_e {} noise_level {} seed {}\n", d.n_electrodes(), d.noise_level, seed_field(d.seed));
    format_matrix_rows(&mut s, &d.dv_mat);
    s
}

pub fn parse_difference(path: &Path, text: &str) -> Result<DifferenceData> {
    let mut r = Lines::new(path, text);
    let h = r.header(&["n_e", "noise_level", "seed"])?;
    let n: usize = r.parse(h[0])?;
    let noise_level: f64 = r.parse(h[1])?;
    let seed = if h[2] == "none" { None } else { Some(r.parse(h[2])?) };
    let mut d = DifferenceData::from_matrix(parse_matrix_rows(&mut r, n, n)?);
    d.noise_level = noise_level;
    d.seed = seed;
    Ok(d)
}

/// Dense sensitivity matrix as text: header `rows <r> cols <c>`, row-major.
pub fn format_sensitivity(s: &SensitivityMatrix) -> String {
    let m = &s.matrix;
    let mut out = format!("rows {} cols {}\n", m.nrows(), m.ncols());
    format_matrix_rows(&mut out, m);
    out
}

pub fn parse_sensitivity(path: &Path, text: &str) -> Result<SensitivityMatrix> {
    let mut r = Lines::new(path, text);
    let h = r.header(&["rows", "cols"])?;
    let (rows, cols): (usize, usize) = (r.parse(h[0])?, r.parse(h[1])?);
    let m = parse_matrix_rows(&mut r, rows, cols)?;
    sensitivity_from(path, m)
}

fn sensitivity_from(path: &Path, matrix: DMatrix<f64>) -> Result<SensitivityMatrix> {
    let ne = (matrix.nrows() as f64).sqrt().round() as usize;
    if ne * ne != matrix.nrows() {
        return Err(LabError::Parse { path: path.into(), line: 1, reason: "row count is not a square".into() });
    }
    Ok(SensitivityMatrix { matrix, n_electrodes: ne })
}

/// Binary sensitivity: `SENS1`, rows and cols as little-endian `u64`, then
/// row-major little-endian `f64` entries.
pub fn encode_sensitivity(s: &SensitivityMatrix) -> Vec<u8> {
    let m = &s.matrix;
    let mut out = Vec::with_capacity(21 + 8 * m.len());
    out.extend_from_slice(SENS_MAGIC);
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.extend_from_slice(&m[(r, c)].to_le_bytes());
        }
    }
    out
}

pub fn decode_sensitivity(path: &Path, bytes: &[u8]) -> Result<SensitivityMatrix> {
    let bad = |reason: &str| LabError::Parse { path: path.into(), line: 0, reason: reason.into() };
    if bytes.len() < 21 || &bytes[..5] != SENS_MAGIC {
        return Err(bad("missing SENS1 header"));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes")) as usize;
    let (rows, cols) = (word(5), word(13));
    if rows.checked_mul(cols).and_then(|n| n.checked_mul(8)) != Some(bytes.len() - 21) {
        return Err(bad("payload size does not match the header"));
    }
    let mut values = bytes[21..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = values.next().expect("length checked");
        }
    }
    sensitivity_from(path, m)
}

/// Per-pixel CSV `pixel,x,y,<column>`.
pub fn format_pixel_csv(grid: &PixelGrid, column: &str, values: &[f64]) -> String {
    let mut s = format!("pixel,x,y,{column}\n");
    for (n, (p, v)) in grid.pixels.iter().zip(values).enumerate() {
        let _ = writeln!(s, "{n},{},{},{}", num(p.centroid.x), num(p.centroid.y), num(*v));
    }
    s
}

#[derive(Serialize)]
struct Sidecar<'a> {
    method: &'a str,
    truncation: usize,
    alpha: Option<f64>,
    beta: Option<f64>,
    eps_zeta: Option<f64>,
    noise_level: f64,
    seed: Option<u64>,
    n_pixels: usize,
}

/// Provenance of a reconstruction as pretty-printed JSON.
pub fn format_sidecar(r: &ReconstructionResult) -> String {
    let sidecar = Sidecar {
        method: r.method.name(),
        truncation: r.truncation,
        alpha: r.alpha,
        beta: r.beta,
        eps_zeta: r.eps_zeta,
        noise_level: r.noise_level,
        seed: r.seed,
        n_pixels: r.delta_sigma.len(),
    };
    let mut s = serde_json::to_string_pretty(&sidecar).expect("plain struct serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use eit_core::{build_disc_mesh, build_pixel_grid, place_electrodes};

    #[test]
    fn mesh_round_trip() {
        let mesh = build_disc_mesh(1.0, 300).unwrap();
        let layout = place_electrodes(&mesh, 16).unwrap();
        let text = format_mesh(&mesh, &layout);
        let (m2, l2) = parse_mesh(Path::new("m.txt"), &text).unwrap();
        assert_eq!(m2, mesh);
        assert_eq!(l2, layout);
        assert!(text.starts_with(&format!("nodes {} triangles {}", mesh.n_nodes(), mesh.n_triangles())));
    }

    #[test]
    fn difference_round_trip_is_exact() {
        let m = DMatrix::from_fn(4, 4, |i, j| (1.0 + i as f64).ln() / (3.0 + j as f64) - 1e-300);
        let mut d = DifferenceData::from_matrix(m);
        d.noise_level = 0.05;
        d.seed = Some(9);
        let back = parse_difference(Path::new("d.txt"), &format_difference(&d)).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn malformed_input_reports_line() {
        let err = parse_difference(Path::new("d.txt"), "n_e 2 noise_level 0 seed none\n1 2\n3\n").unwrap_err();
        assert!(matches!(err, LabError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn sensitivity_formats_round_trip() {
        let s = SensitivityMatrix {
            matrix: DMatrix::from_fn(4, 3, |i, j| (i as f64 - 1.5) * (j as f64 + 0.1).sqrt()),
            n_electrodes: 2,
        };
        let p = Path::new("s");
        assert_eq!(parse_sensitivity(p, &format_sensitivity(&s)).unwrap(), s);
        let bytes = encode_sensitivity(&s);
        assert_eq!(&bytes[..5], b"SENS1");
        assert_eq!(bytes.len(), 21 + 8 * 12);
        assert_eq!(f64::from_le_bytes(bytes[21..29].try_into().unwrap()), s.matrix[(0, 0)]);
        assert_eq!(f64::from_le_bytes(bytes[29..37].try_into().unwrap()), s.matrix[(0, 1)]);
        assert_eq!(decode_sensitivity(p, &bytes).unwrap(), s);
        assert!(decode_sensitivity(p, &bytes[..30]).is_err());
    }

    #[test]
    fn pixel_outputs() {
        let mesh = build_disc_mesh(1.0, 300).unwrap();
        let grid = build_pixel_grid(&mesh, 20, 0.05).unwrap();
        let text = format_pixel_grid(&grid);
        assert_eq!(text.lines().count(), grid.n_pixels() + 1);
        let csv = format_pixel_csv(&grid, "w", &vec![1.0; grid.n_pixels()]);
        assert!(csv.starts_with("pixel,x,y,w\n0,"));
        assert_eq!(csv.lines().count(), grid.n_pixels() + 1);
    }
}
