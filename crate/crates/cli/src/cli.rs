use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use meshfim_core::detect::{DetectConfig, PointSource};
use meshfim_core::gate::{GateParams, DEFAULT_LATENT_DIM, DEFAULT_QUERY_COUNT, DEFAULT_RADIUS};
use meshfim_core::generators::GeneratorSpec;
use meshfim_core::mesh::{save_obj, FaceAdjacencyGraph};
use meshfim_core::metrics::EvalConfig;
use meshfim_core::region::{
    extract_context, sample_bfs_region, sample_percolation_region, sample_training_region, RegionSpec,
};
use meshfim_core::repair::RepairConfig;
use meshfim_core::FaceSet;

use crate::error::CliError;
use crate::ops::{self, GateVisOptions};

#[derive(Debug, Parser)]
#[command(name = "meshfim", version, about = "Mesh fill-in-the-middle repair tools")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find broken regions by comparing a mesh against its reference.
    Detect(DetectCmd),
    /// Pick a target region and its context rings.
    SampleRegion(SampleRegionCmd),
    /// Write the fill-in-the-middle token sequence of a region.
    Serialize(SerializeCmd),
    /// Regenerate one region, or detect and repair iteratively.
    Repair(RepairCmd),
    /// Score patches listed in a manifest.
    Eval(EvalCmd),
    /// Dump gate values and reference coverage at query points.
    GateVis(GateVisCmd),
    /// Run the local HTTP service.
    Serve(ServeCmd),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PointSourceArg {
    Reference,
    Candidate,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Number of cameras on the Fibonacci sphere.
    #[arg(long, default_value_t = DetectConfig::default().views)]
    pub views: usize,
    /// Render resolution in pixels per side.
    #[arg(long = "res", default_value_t = DetectConfig::default().resolution)]
    pub resolution: usize,
    #[arg(long, default_value_t = DetectConfig::default().eps_dot)]
    pub eps_dot: f64,
    /// DBSCAN radius in normalized units.
    #[arg(long, default_value_t = DetectConfig::default().eps_cls)]
    pub eps_cls: f64,
    #[arg(long, default_value_t = DetectConfig::default().min_pts)]
    pub min_pts: usize,
    /// Clusters with fewer points are dropped.
    #[arg(long, default_value_t = DetectConfig::default().min_cluster)]
    pub min_cluster: usize,
    #[arg(long, value_enum, default_value_t = PointSourceArg::Reference)]
    pub point_source: PointSourceArg,
}

impl DetectArgs {
    pub fn config(&self) -> DetectConfig {
        DetectConfig {
            views: self.views,
            resolution: self.resolution,
            eps_dot: self.eps_dot,
            eps_cls: self.eps_cls,
            min_pts: self.min_pts,
            min_cluster: self.min_cluster,
            point_source: match self.point_source {
                PointSourceArg::Reference => PointSource::Reference,
                PointSourceArg::Candidate => PointSource::Candidate,
            },
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct DetectCmd {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[command(flatten)]
    pub detect: DetectArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write one PNG of candidate masks per view into this directory.
    #[arg(long)]
    pub masks: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Bfs,
    Percolation,
    /// Random seed face and the training mix of BFS and percolation.
    Training,
}

#[derive(Debug, Args)]
pub struct SampleRegionCmd {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Bfs, conflicts_with = "faces")]
    pub mode: ModeArg,
    /// Face the region grows from (bfs and percolation).
    #[arg(long)]
    pub seed_face: Option<usize>,
    /// Explicit target faces; must be edge-connected.
    #[arg(long, value_delimiter = ',')]
    pub faces: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1200)]
    pub budget: usize,
    /// Context width in face rings.
    #[arg(long, default_value_t = 3)]
    pub width: usize,
    /// Acceptance probability for percolation growth.
    #[arg(long, default_value_t = 0.7)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Binary,
}

#[derive(Debug, Args)]
pub struct SerializeCmd {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub region: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub bins: u32,
    #[arg(long, value_enum, default_value_t = FormatArg::Jsonl)]
    pub format: FormatArg,
    /// Jitter context vertices by up to this much before quantizing.
    #[arg(long)]
    pub augment: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Quantize the mesh as given instead of fitting it to the token domain.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct RepairCmd {
    #[arg(long)]
    pub input: PathBuf,
    /// Reference mesh; required unless --region is given.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// oracle, triangulate, stitch-back:PATH or external:CMD.
    #[arg(long, default_value = "oracle")]
    pub generator: GeneratorSpec,
    #[arg(long, default_value_t = RepairConfig::default().rounds)]
    pub rounds: usize,
    #[arg(long, default_value_t = RepairConfig::default().tau_fp)]
    pub tau_fp: usize,
    #[command(flatten)]
    pub detect: DetectArgs,
    /// Regenerate just this region instead of running detection.
    #[arg(long)]
    pub region: Option<PathBuf>,
    /// Write the generated patch here (single-region mode).
    #[arg(long)]
    pub patch: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    /// Manifest listing (gt, context, target, patch) OBJ files.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = EvalConfig::default().gt_samples)]
    pub gt_samples: usize,
    #[arg(long, default_value_t = EvalConfig::default().patch_samples)]
    pub patch_samples: usize,
}

#[derive(Debug, Args)]
pub struct GateVisCmd {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub mesh: PathBuf,
    /// Leave the region's target faces out of the mesh first.
    #[arg(long)]
    pub region: Option<PathBuf>,
    /// Gate weights; freshly initialized from --seed when absent.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_LATENT_DIM)]
    pub latent_dim: usize,
    #[arg(long, default_value_t = DEFAULT_QUERY_COUNT)]
    pub queries: usize,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    pub radius: f64,
    #[arg(long, default_value_t = GateVisOptions::default().samples)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeCmd {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory for stored meshes and job artifacts.
    #[arg(long, env = "MESHFIM_WORKSPACE", default_value = "meshfim-workspace")]
    pub workspace: PathBuf,
    /// Jobs allowed to run at the same time.
    #[arg(long, default_value_t = 2)]
    pub max_jobs: usize,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Detect(c) => detect(c),
        Command::SampleRegion(c) => sample_region(c),
        Command::Serialize(c) => serialize(c),
        Command::Repair(c) => repair(c),
        Command::Eval(c) => eval(c),
        Command::GateVis(c) => gate_vis(c),
        Command::Serve(c) => serve(c),
    }
}

fn detect(c: DetectCmd) -> Result<(), CliError> {
    let mesh = ops::read_mesh(&c.input)?;
    let reference = ops::read_mesh(&c.reference)?;
    let cfg = c.detect.config();
    let detection = ops::detect(&mesh, &reference, cfg.clone())?;
    info!("{} broken points in {} clusters", detection.points.len(), detection.clusters.len());
    ops::write_json(&c.out, &detection)?;
    if let Some(dir) = &c.masks {
        let n = crate::masks::write_masks(dir, &mesh, &reference, &cfg)?;
        info!("wrote {n} mask images to {}", dir.display());
    }
    Ok(())
}

fn sample_region(c: SampleRegionCmd) -> Result<(), CliError> {
    let mesh = ops::read_mesh(&c.mesh)?;
    let graph = FaceAdjacencyGraph::build(&mesh);
    let seed_face = || c.seed_face.ok_or_else(|| CliError::Usage("--seed-face is required for this mode".into()));
    let region = match (&c.faces, c.mode) {
        (Some(faces), _) => {
            if faces.is_empty() {
                return Err(CliError::Usage("--faces is empty".into()));
            }
            let target: FaceSet = faces.iter().copied().collect();
            extract_context(&mesh, &graph, &target, c.width)?
        }
        (None, ModeArg::Bfs) => sample_bfs_region(&mesh, &graph, seed_face()?, c.budget, c.width)?,
        (None, ModeArg::Percolation) => {
            sample_percolation_region(&mesh, &graph, seed_face()?, c.p, c.budget, c.seed, c.width)?
        }
        (None, ModeArg::Training) => sample_training_region(&mesh, &graph, c.budget, c.width, c.seed)?,
    };
    info!("target {} faces, context {} faces", region.target.len(), region.context.len());
    let mut text = region.to_json();
    text.push('\n');
    ops::write_text(&c.out, &text)
}

fn serialize(c: SerializeCmd) -> Result<(), CliError> {
    let mesh = ops::read_mesh(&c.mesh)?;
    let region = ops::read_region(&c.region, &mesh)?;
    let seq = ops::serialize_region(&mesh, &region, c.bins, c.augment, c.seed, c.raw)?;
    match c.format {
        FormatArg::Jsonl => {
            let mut line = seq.to_json_line();
            line.push('\n');
            ops::write_text(&c.out, &line)
        }
        FormatArg::Binary => {
            let file = std::fs::File::create(&c.out).map_err(|source| CliError::Write { path: c.out.clone(), source })?;
            Ok(seq.write_binary(BufWriter::new(file))?)
        }
    }
}

fn write_mesh(path: &Path, mesh: &meshfim_core::mesh::Mesh) -> Result<(), CliError> {
    save_obj(path, mesh).map_err(|source| CliError::Mesh { path: path.to_path_buf(), source })
}

fn repair(c: RepairCmd) -> Result<(), CliError> {
    let mesh = ops::read_mesh(&c.input)?;
    let reference = c.reference.as_deref().map(ops::read_mesh).transpose()?;
    if let Some(region_path) = &c.region {
        let region = ops::read_region(region_path, &mesh)?;
        let result = ops::edit(&mesh, &region, &c.generator, reference.as_ref(), c.seed)?;
        info!("edit {:?}", result.report.status);
        if let Some(path) = &c.patch {
            write_mesh(path, &result.patch)?;
        }
        write_mesh(&c.out, result.merged.as_ref().unwrap_or(&mesh))?;
        return ops::write_json(&c.report, &result.report);
    }
    if c.patch.is_some() {
        return Err(CliError::Usage("--patch needs --region".into()));
    }
    let reference = reference.ok_or_else(|| CliError::Usage("--ref is required without --region".into()))?;
    let cfg = RepairConfig { rounds: c.rounds, tau_fp: c.tau_fp, seed: c.seed, ..Default::default() };
    let (fixed, report) = ops::repair(&mesh, &reference, &c.generator, &cfg, c.detect.config())?;
    info!("repair finished after {} rounds: {:?}", report.rounds.len(), report.exit);
    write_mesh(&c.out, &fixed)?;
    ops::write_json(&c.report, &report)
}

fn eval(c: EvalCmd) -> Result<(), CliError> {
    let cfg = EvalConfig { gt_samples: c.gt_samples, patch_samples: c.patch_samples, seed: c.seed, ..Default::default() };
    let doc = ops::evaluate_manifest(&c.pairs, &cfg)?;
    ops::write_json(&c.out, &doc)
}

fn gate_vis(c: GateVisCmd) -> Result<(), CliError> {
    let reference = ops::read_mesh(&c.reference)?;
    let mesh = ops::read_mesh(&c.mesh)?;
    let region: Option<RegionSpec> = c.region.as_deref().map(|p| ops::read_region(p, &mesh)).transpose()?;
    let params = match &c.params {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|source| CliError::Read { path: path.clone(), source })?;
            GateParams::read_from(std::io::BufReader::new(file))?
        }
        None => GateParams::init(c.latent_dim, c.seed),
    };
    let opts = GateVisOptions { queries: c.queries, radius: c.radius, samples: c.samples, seed: c.seed };
    let dump = ops::gate_visual(&reference, &mesh, region.as_ref().map(|r| &r.target), &params, &opts)?;
    ops::write_json(&c.out, &dump)
}

fn serve(c: ServeCmd) -> Result<(), CliError> {
    if c.max_jobs == 0 {
        return Err(CliError::Usage("--max-jobs must be at least 1".into()));
    }
    let addr: SocketAddr = format!("{}:{}", c.host, c.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("bad listen address: {e}")))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Service(e.to_string()))?;
    runtime.block_on(crate::service::serve(addr, &c.workspace, c.max_jobs))
}
