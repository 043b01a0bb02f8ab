//! End-to-end experiment driver: meshes, synthetic data, the weight image,
//! the reconstructions, metrics and all file outputs.
//!
//! Every (case, noise level) run synthesizes its data once and feeds the
//! same `dV` to every method. Runs execute sequentially in configuration
//! order, so outputs are byte-identical for identical configurations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use eit_core::forward::PotentialSet;
use eit_core::mesh::{build_deformed_mesh, build_disc_mesh, place_electrodes, ElectrodeLayout, TriMesh};
use eit_core::pixels::{build_pixel_grid, PixelGrid};
use eit_core::sfm::build_data_inverse;
use eit_core::{
    add_noise, assemble_sensitivity, difference_data, measure_voltages, rasterize_phantom, DifferenceData,
    ForwardProblem, LinearizedSystem, Method, Metrics, Phantom, ReconstructionResult, SensitivityMatrix, SfmIndexField,
    TruncationRule, VoltageDataSet,
};

use crate::config::{CaseSpec, DomainKind, ExperimentConfig};
use crate::error::{Result, Stage, StageExt};
use crate::heatmap::{render_heatmap, Palette};
use crate::io::{self, write_file};

/// Mesh, electrodes, pixel grid and reference solution of one domain.
#[derive(Debug, Clone)]
pub struct DomainContext {
    pub kind: DomainKind,
    pub mesh: TriMesh,
    pub layout: ElectrodeLayout,
    pub grid: PixelGrid,
    pub potentials0: PotentialSet,
    pub reference: VoltageDataSet,
    pub sigma0: f64,
    sensitivity: Option<SensitivityMatrix>,
    system: Option<LinearizedSystem>,
}

impl DomainContext {
    /// Builds the context far enough for stage `upto`.
    pub fn build(cfg: &ExperimentConfig, kind: DomainKind, upto: Stage) -> Result<Self> {
        let d = &cfg.domain;
        let name = kind.name();
        let mesh = match kind {
            DomainKind::Disc => build_disc_mesh(1.0, d.disc_elements),
            DomainKind::Deformed => build_deformed_mesh(|t| d.radius(kind, t), d.deformed_elements),
        }
        .stage(Stage::Mesh, format!("{name} mesh"))?;
        let layout = place_electrodes(&mesh, d.electrodes).stage(Stage::Mesh, format!("{name} electrodes"))?;
        let margin = d.margin_edges * mesh.mean_boundary_edge();
        let grid = build_pixel_grid(&mesh, d.pixels(kind), margin).stage(Stage::Mesh, format!("{name} pixel grid"))?;
        let potentials0 = ForwardProblem::new(&mesh, &layout, vec![d.sigma0; mesh.n_triangles()])
            .and_then(|fp| fp.solve_all())
            .stage(Stage::Forward, format!("{name} reference solution"))?;
        let reference = measure_voltages(&potentials0, &layout, "reference");
        let mut ctx = DomainContext {
            kind,
            mesh,
            layout,
            grid,
            potentials0,
            reference,
            sigma0: d.sigma0,
            sensitivity: None,
            system: None,
        };
        if upto >= Stage::Sense {
            let s = assemble_sensitivity(&ctx.mesh, &ctx.potentials0, &ctx.grid)
                .stage(Stage::Sense, format!("{name} sensitivity"))?;
            if upto >= Stage::Recon {
                ctx.system = Some(LinearizedSystem::new(s).stage(Stage::Recon, format!("{name} SVD of S"))?);
            } else {
                ctx.sensitivity = Some(s);
            }
        }
        Ok(ctx)
    }

    pub fn sensitivity(&self) -> Option<&SensitivityMatrix> {
        self.system.as_ref().map(|s| &s.s).or(self.sensitivity.as_ref())
    }

    pub fn system(&self) -> Option<&LinearizedSystem> {
        self.system.as_ref()
    }

    /// Conductivity and clean difference data of a phantom.
    pub fn simulate(&self, phantom: &Phantom) -> eit_core::Result<(VoltageDataSet, DifferenceData)> {
        phantom.validate(&self.mesh)?;
        let sigma = rasterize_phantom(phantom, &self.mesh)?;
        let u = ForwardProblem::new(&self.mesh, &self.layout, sigma)?.solve_all()?;
        let v = measure_voltages(&u, &self.layout, "measured");
        let dv = difference_data(&self.reference, &v)?;
        Ok((v, dv))
    }
}

/// Data, weight image and weight statistics of one (case, noise level) run.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub case: String,
    pub domain: DomainKind,
    pub noise_level: f64,
    pub seed: u64,
    pub data: DifferenceData,
    pub w: Option<Vec<f64>>,
    /// Mean of `w` over pixels whose centroid lies inside an anomaly.
    pub w_inside_mean: Option<f64>,
    pub w_outside_mean: Option<f64>,
}

/// One method applied to one run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub case: String,
    pub domain: DomainKind,
    pub noise_level: f64,
    pub seed: u64,
    pub result: ReconstructionResult,
    pub metrics: Metrics,
}

impl RunRecord {
    pub fn method(&self) -> Method {
        self.result.method
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentBundle {
    pub config: ExperimentConfig,
    pub contexts: Vec<DomainContext>,
    pub runs: Vec<CaseRun>,
    pub records: Vec<RunRecord>,
}

impl ExperimentBundle {
    pub fn context(&self, kind: DomainKind) -> Option<&DomainContext> {
        self.contexts.iter().find(|c| c.kind == kind)
    }

    pub fn record(&self, case: &str, noise_level: f64, method: Method) -> Option<&RunRecord> {
        self.records.iter().find(|r| r.case == case && r.noise_level == noise_level && r.method() == method)
    }

    pub fn run(&self, case: &str, noise_level: f64) -> Option<&CaseRun> {
        self.runs.iter().find(|r| r.case == case && r.noise_level == noise_level)
    }
}

/// Noise seed of a run, derived from the base seed, the case name and the
/// index of the noise level with FNV-1a so it is stable across platforms.
pub fn derive_seed(base: u64, case: &str, level_index: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let bytes = base.to_le_bytes().into_iter().chain(case.bytes()).chain([0]).chain((level_index as u64).to_le_bytes());
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Directory name of a noise level, e.g. `noise_0.01`.
pub fn noise_dir(level: f64) -> String {
    format!("noise_{level}")
}

struct Outputs<'a> {
    root: &'a Path,
    images: bool,
    scale: u32,
}

impl Outputs<'_> {
    fn write(&self, rel: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
        write_file(&self.root.join(rel), contents).stage(Stage::Output, rel.display())
    }

    fn image(&self, rel: &Path, values: &[f64], grid: &PixelGrid, palette: Palette) -> Result<()> {
        if self.images {
            render_heatmap(values, grid, palette, self.scale, &self.root.join(rel))
                .stage(Stage::Output, rel.display())?;
        }
        Ok(())
    }
}

fn mean_where(values: &[f64], mask: &[bool], want: bool) -> Option<f64> {
    let (sum, n) = values.iter().zip(mask).filter(|(_, &m)| m == want).fold((0.0, 0), |(s, n), (v, _)| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// `w_max - w`, the weight image oriented so that anomalies are large.
pub fn weight_contrast(w: &[f64]) -> Vec<f64> {
    let w_max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    w.iter().map(|x| w_max - x).collect()
}

/// Metrics of `W1` are taken on [`weight_contrast`] against the phantom with
/// every contrast made positive, since `w` carries no sign.
fn weight_metrics(w: &[f64], grid: &PixelGrid, phantom: &Phantom) -> Metrics {
    let mut unsigned = phantom.clone();
    for a in &mut unsigned.anomalies {
        a.contrast = a.contrast.abs();
    }
    Metrics::evaluate(&weight_contrast(w), grid, &unsigned, None)
}

fn zero_result(method: Method, n: usize, data: &DifferenceData) -> ReconstructionResult {
    ReconstructionResult {
        delta_sigma: vec![0.0; n],
        method,
        truncation: 0,
        alpha: None,
        beta: None,
        eps_zeta: None,
        seed: data.seed,
        noise_level: data.noise_level,
    }
}

fn reconstruct(
    cfg: &ExperimentConfig,
    system: &LinearizedSystem,
    method: Method,
    data: &DifferenceData,
    w: &[f64],
) -> eit_core::Result<ReconstructionResult> {
    let m = &cfg.method;
    match method {
        Method::S => system.reconstruct_s(data, m.t0),
        Method::B => {
            let beta = match m.beta {
                Some(b) => b,
                None => system.default_beta(w)?,
            };
            system.reconstruct_b(data, w, beta, TruncationRule::Relative(m.rho))
        }
        Method::A => system.reconstruct_a(data, w, m.alpha, m.t0, m.t2_rule.rule()),
        Method::W1 => ReconstructionResult::weight_image(w, m.eps_zeta, data),
    }
}

/// Runs every stage up to and including `upto`, writing the outputs of each
/// stage under `cfg.output.dir`.
pub fn run_pipeline(cfg: &ExperimentConfig, upto: Stage) -> Result<ExperimentBundle> {
    run_pipeline_with(cfg, upto, &mut |_| {})
}

/// [`run_pipeline`] with a progress callback receiving one line per step.
pub fn run_pipeline_with(
    cfg: &ExperimentConfig,
    upto: Stage,
    progress: &mut dyn FnMut(&str),
) -> Result<ExperimentBundle> {
    cfg.validate().stage(Stage::Config, "validation")?;
    let methods = cfg.methods().stage(Stage::Config, "methods")?;
    let root = cfg.output.dir.as_path();
    let out = Outputs { root, images: cfg.output.images, scale: cfg.output.image_scale };
    out.write(Path::new("config.toml"), cfg.to_toml())?;

    let mut contexts = Vec::new();
    for kind in [DomainKind::Disc, DomainKind::Deformed] {
        if !cfg.cases.iter().any(|c| c.domain == kind) {
            continue;
        }
        progress(&format!("building {} domain", kind.name()));
        let ctx = DomainContext::build(cfg, kind, upto)?;
        write_domain_outputs(&out, &ctx, upto)?;
        contexts.push(ctx);
    }

    let mut bundle =
        ExperimentBundle { config: cfg.clone(), contexts: Vec::new(), runs: Vec::new(), records: Vec::new() };
    if upto >= Stage::Forward {
        for case in &cfg.cases {
            let ctx = contexts.iter().find(|c| c.kind == case.domain).expect("context built for every case domain");
            run_case(cfg, ctx, case, &methods, upto, &out, &mut bundle, progress)?;
        }
    }
    if upto >= Stage::Metrics {
        let (csv, txt) = summarize(&bundle.records);
        out.write(Path::new("summary.csv"), csv)?;
        out.write(Path::new("summary.txt"), txt)?;
    }
    bundle.contexts = contexts;
    Ok(bundle)
}

fn write_domain_outputs(out: &Outputs<'_>, ctx: &DomainContext, upto: Stage) -> Result<()> {
    let dir = PathBuf::from(ctx.kind.name());
    out.write(&dir.join("mesh.txt"), io::format_mesh(&ctx.mesh, &ctx.layout))?;
    out.write(&dir.join("pixels.txt"), io::format_pixel_grid(&ctx.grid))?;
    if upto >= Stage::Forward {
        out.write(&dir.join("reference_voltages.txt"), io::format_voltages(&ctx.reference))?;
    }
    if let Some(s) = ctx.sensitivity() {
        out.write(&dir.join("sensitivity.bin"), io::encode_sensitivity(s))?;
        if upto == Stage::Sense {
            out.write(&dir.join("sensitivity.txt"), io::format_sensitivity(s))?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_case(
    cfg: &ExperimentConfig,
    ctx: &DomainContext,
    case: &CaseSpec,
    methods: &[Method],
    upto: Stage,
    out: &Outputs<'_>,
    bundle: &mut ExperimentBundle,
    progress: &mut dyn FnMut(&str),
) -> Result<()> {
    let name = &case.name;
    let phantom = case.phantom(ctx.sigma0);
    let (voltages, clean) = ctx.simulate(&phantom).stage(Stage::Forward, format!("case {name}"))?;
    let case_dir = PathBuf::from(name);
    out.write(&case_dir.join("voltages.txt"), io::format_voltages(&voltages))?;
    let truth = ctx.grid.select(|p| phantom.is_inside_anomaly(p));

    for (li, &level) in cfg.noise.levels.iter().enumerate() {
        let seed = derive_seed(cfg.noise.seed, name, li);
        let context = format!("case {name}, noise {level}");
        progress(&context);
        let data = add_noise(&clean, level, seed).stage(Stage::Forward, &context)?;
        let dir = case_dir.join(noise_dir(level));
        out.write(&dir.join("difference.txt"), io::format_difference(&data))?;
        let mut run = CaseRun {
            case: name.clone(),
            domain: ctx.kind,
            noise_level: level,
            seed,
            data,
            w: None,
            w_inside_mean: None,
            w_outside_mean: None,
        };
        if upto < Stage::Sfm {
            bundle.runs.push(run);
            continue;
        }
        let s = ctx.sensitivity().expect("sensitivity built for the sfm stage");
        let zero_data = run.data.dv_vec.iter().all(|&x| x == 0.0);
        let w = if zero_data {
            vec![0.0; s.n_pixels()]
        } else {
            let inv = build_data_inverse(&run.data.dv_mat, cfg.method.eps_zeta).stage(Stage::Sfm, &context)?;
            SfmIndexField::compute(s, &inv).stage(Stage::Sfm, &context)?.w
        };
        out.write(&dir.join("w.csv"), io::format_pixel_csv(&ctx.grid, "w", &w))?;
        out.image(&dir.join("w.png"), &w, &ctx.grid, Palette::Grayscale)?;
        run.w_inside_mean = mean_where(&w, &truth, true);
        run.w_outside_mean = mean_where(&w, &truth, false);
        run.w = Some(w);

        if upto >= Stage::Recon {
            let system = ctx.system().expect("system built for the recon stage");
            let w = run.w.as_deref().expect("weights computed above");
            for &method in methods {
                let result = if zero_data {
                    zero_result(method, s.n_pixels(), &run.data)
                } else {
                    reconstruct(cfg, system, method, &run.data, w)
                        .stage(Stage::Recon, format!("{context}, method {}", method.name()))?
                };
                let file = method.name();
                out.write(
                    &dir.join(format!("{file}.csv")),
                    io::format_pixel_csv(&ctx.grid, "value", &result.delta_sigma),
                )?;
                out.write(&dir.join(format!("{file}.json")), io::format_sidecar(&result))?;
                let palette = if method == Method::W1 { Palette::Grayscale } else { Palette::Diverging };
                out.image(&dir.join(format!("{file}.png")), &result.delta_sigma, &ctx.grid, palette)?;
                let metrics = if upto < Stage::Metrics {
                    Metrics::default()
                } else if method == Method::W1 {
                    if zero_data {
                        Metrics::evaluate(&result.delta_sigma, &ctx.grid, &phantom, None)
                    } else {
                        weight_metrics(&result.delta_sigma, &ctx.grid, &phantom)
                    }
                } else {
                    Metrics::evaluate(&result.delta_sigma, &ctx.grid, &phantom, Some((&system.s, &run.data.dv_vec)))
                };
                bundle.records.push(RunRecord {
                    case: name.clone(),
                    domain: ctx.kind,
                    noise_level: level,
                    seed,
                    result,
                    metrics,
                });
            }
        }
        bundle.runs.push(run);
    }
    Ok(())
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), |v| format!("{v:.6e}"))
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) })
}

/// CSV with one row per record and a plain-text table with the rows plus
/// per-method medians for each noise level. Undefined metrics print `NA`
/// and are left out of the medians.
pub fn summarize(records: &[RunRecord]) -> (String, String) {
    let header =
        ["case", "domain", "noise", "seed", "method", "truncation", "centroid_error", "jaccard", "ringing", "misfit"];
    let rows: Vec<[String; 10]> = records
        .iter()
        .map(|r| {
            let m = &r.metrics;
            [
                r.case.clone(),
                r.domain.name().into(),
                format!("{}", r.noise_level),
                r.seed.to_string(),
                r.method().name().into(),
                r.result.truncation.to_string(),
                cell(m.centroid_error),
                cell(m.support_jaccard),
                cell(m.ringing_energy),
                cell(m.relative_data_misfit),
            ]
        })
        .collect();

    let mut csv = header.join(",");
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.join(","));
        csv.push('\n');
    }

    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[&str]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut txt = line(&header);
    for row in &rows {
        txt.push_str(&line(&row.iter().map(String::as_str).collect::<Vec<_>>()));
    }

    let mut levels: Vec<f64> = Vec::new();
    let mut methods: Vec<Method> = Vec::new();
    for r in records {
        if !levels.contains(&r.noise_level) {
            levels.push(r.noise_level);
        }
        if !methods.contains(&r.method()) {
            methods.push(r.method());
        }
    }
    if !records.is_empty() {
        let _ = writeln!(txt, "\nmedians over cases");
        let _ = writeln!(
            txt,
            "{:<8}{:<8}{:>6}  {:>14}{:>14}{:>14}",
            "noise", "method", "runs", "centroid_error", "jaccard", "ringing"
        );
        for &level in &levels {
            for &method in &methods {
                let sel: Vec<&RunRecord> =
                    records.iter().filter(|r| r.noise_level == level && r.method() == method).collect();
                let med =
                    |f: fn(&Metrics) -> Option<f64>| cell(median(sel.iter().filter_map(|r| f(&r.metrics)).collect()));
                let _ = writeln!(
                    txt,
                    "{:<8}{:<8}{:>6}  {:>14}{:>14}{:>14}",
                    format!("{level}"),
                    method.name(),
                    sel.len(),
                    med(|m| m.centroid_error),
                    med(|m| m.support_jaccard),
                    med(|m| m.ringing_energy),
                );
            }
        }
    }
    (csv, txt)
}
