use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use eit_lab::{experiment, ExperimentConfig, Stage};

#[derive(Parser)]
#[command(name = "eit", version, about = "Difference EIT simulation and reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build meshes, electrodes and pixel grids.
    Mesh(Common),
    /// Also simulate voltages and difference data.
    Forward(Common),
    /// Also assemble the sensitivity matrices.
    Sense(Common),
    /// Also compute the weight images.
    Sfm(Common),
    /// Also run the reconstructions.
    Recon(Common),
    /// Run everything and write the metrics summary.
    Experiment(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Base noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Methods to run (S, B, A, W1), comma separated or repeated.
    #[arg(short, long, value_delimiter = ',')]
    method: Vec<String>,
    /// Restrict to the named cases.
    #[arg(long, value_delimiter = ',')]
    case: Vec<String>,
    /// Skip PNG heatmaps.
    #[arg(long)]
    no_images: bool,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                ExperimentConfig::load(path).with_context(|| format!("[{}] loading configuration", Stage::Config))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.noise.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if !self.method.is_empty() {
            cfg.method.methods = self.method.clone();
        }
        if !self.case.is_empty() {
            if let Some(missing) = self.case.iter().find(|c| !cfg.cases.iter().any(|k| &k.name == *c)) {
                anyhow::bail!("[{}] unknown case `{missing}`", Stage::Config);
            }
            cfg.cases.retain(|k| self.case.contains(&k.name));
        }
        if self.no_images {
            cfg.output.images = false;
        }
        cfg.validate().with_context(|| format!("[{}] invalid configuration", Stage::Config))?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (common, upto) = match &cli.command {
        Command::Mesh(c) => (c, Stage::Mesh),
        Command::Forward(c) => (c, Stage::Forward),
        Command::Sense(c) => (c, Stage::Sense),
        Command::Sfm(c) => (c, Stage::Sfm),
        Command::Recon(c) => (c, Stage::Recon),
        Command::Experiment(c) => (c, Stage::Metrics),
    };
    let cfg = common.resolve()?;
    experiment::run_pipeline_with(&cfg, upto, &mut |line| eprintln!("{line}"))?;
    if upto >= Stage::Metrics {
        let summary = cfg.output.dir.join("summary.txt");
        let text = std::fs::read_to_string(&summary).with_context(|| format!("reading {}", summary.display()))?;
        print!("{text}");
    }
    eprintln!("outputs written to {}", cfg.output.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
