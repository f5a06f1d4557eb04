mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{CommandFactory, Parser, Subcommand};
use superpart_core::cloud_io::{read_cloud, voxel_subsample, write_cloud_with_scalars, CloudFormat, PointCloud, PropertyMap};
use superpart_core::eval::{confusion_and_miou, oracle_assign, purity_sweep, write_sweep_csv, SweepMode};
use superpart_core::features::{assemble_point_features, FeatureConfig, RansacConfig, GEOMETRIC_NAMES};
use superpart_core::hierarchy::{read_sph1, write_sph1, Sph1};
use superpart_core::kernel::diagnostics::kernel_check;
use superpart_core::pipeline::{run_pipeline, PipelineConfig};
use superpart_core::spgraph::{build_superpoint_graph, SpGraphConfig};
use superpart_core::synthetic::{room_scene, SceneConfig};

/// Hierarchical superpoint partitions of point clouds.
///
/// Every subcommand also reads `--config <file>` with `key = value` lines
/// named after its flags; flags on the command line take precedence.
/// `SUPERPART_THREADS` caps the number of worker threads.
#[derive(Parser, Debug)]
#[command(name = "superpart", version)]
struct Cli {
    /// Config file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Compute per-point features and write them as PLY properties.
    Features {
        #[arg(long)]
        input: PathBuf,
        /// Voxel size in meters, 0 to keep every point.
        #[arg(long, default_value_t = 0.03)]
        voxel: f64,
        /// Neighbors used for local geometry.
        #[arg(long, default_value_t = 50)]
        k: usize,
        /// Spatial factor in 1/m; a positive value adds scaled xyz columns.
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the hierarchical partition and write it as SPH1.
    Partition {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated regularization strengths, one per level.
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
        #[arg(long, default_value_t = 0.03)]
        voxel: f64,
        #[arg(long)]
        out: PathBuf,
        /// Weight the fidelity term of upper levels by point counts.
        #[arg(long)]
        weighted_fidelity: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        /// Neighbors per point in the partition graph.
        #[arg(long, default_value_t = 10)]
        k_adj: usize,
        #[arg(long, default_value_t = 50)]
        k: usize,
    },
    /// Add the superpoint graph of one level to an SPH1 file.
    Graph {
        #[arg(long)]
        partition: PathBuf,
        #[arg(long, default_value_t = 1)]
        level: usize,
        /// Gap threshold in meters at this level.
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 3)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Majority-label oracle purity of one partition level.
    Oracle {
        #[arg(long)]
        partition: PathBuf,
        /// Use the labels stored with the partition's points.
        #[arg(long)]
        labels_from_input: bool,
        #[arg(long, default_value_t = 1)]
        level: usize,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Oracle purity across a grid of λ or voxel sizes.
    Sweep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = ["partition", "voxel"])]
        mode: String,
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        #[arg(long)]
        csv: PathBuf,
        /// Voxel size applied before partitioning, 0 to keep every point.
        #[arg(long, default_value_t = 0.03)]
        voxel: f64,
        #[arg(long, default_value_t = 10)]
        k_adj: usize,
    },
    /// Run the attention, loss and augmentation checks on a toy scene.
    KernelCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Embed level 1 from mean point features instead of the point encoder.
        #[arg(long)]
        nano: bool,
    },
    /// Time every pipeline stage and report milliseconds as CSV.
    Bench {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        #[arg(long, default_value_t = 0.03)]
        voxel: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [0.003, 0.03])]
        lambda: Vec<f64>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write a labeled synthetic room scene.
    Synth {
        #[arg(long, default_value_t = 100_000)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Write ASCII instead of binary PLY.
        #[arg(long)]
        ascii: bool,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<ExitCode> {
    let args = config::merge_config(std::env::args().collect(), &Cli::command())?;
    let cli = Cli::parse_from(args);
    let requested = match &cli.command {
        Cmd::Partition { threads, .. } => *threads,
        _ => None,
    };
    setup_threads(requested)?;

    match cli.command {
        Cmd::Features { input, voxel, k, mu, out } => features(&input, voxel, k, mu, &out)?,
        Cmd::Partition { input, lambda, voxel, out, weighted_fidelity, seed, k_adj, k, .. } => {
            let cfg = PipelineConfig {
                voxel,
                features: FeatureConfig { k_feat: k, ransac: RansacConfig::with_seed(seed), ..Default::default() },
                k_adj,
                lambdas: lambda,
                solver: superpart_core::SolverConfig { seed, ..Default::default() },
                weighted_fidelity,
                build_graphs: false,
                ..Default::default()
            };
            partition(&input, &cfg, &out)?
        }
        Cmd::Graph { partition, level, eps, steps, out } => graph(&partition, level, eps, steps, &out)?,
        Cmd::Oracle { partition, labels_from_input, level, csv } => {
            if !labels_from_input {
                bail!("labels are read from the partition's points; pass --labels-from-input");
            }
            oracle(&partition, level, &csv)?
        }
        Cmd::Sweep { input, mode, grid, csv, voxel, k_adj } => {
            let cloud = load(&input)?;
            let cfg = PipelineConfig { voxel, k_adj, build_graphs: false, ..Default::default() };
            let rows = purity_sweep(&cloud, &grid, mode.parse::<SweepMode>()?, &cfg)?;
            let mut w = BufWriter::new(create(&csv)?);
            write_sweep_csv(&rows, &mut w)?;
            w.flush()?;
            eprintln!("{} rows written to {}", rows.len(), csv.display());
        }
        Cmd::KernelCheck { seed, nano } => {
            let report = kernel_check(seed, nano)?;
            for c in &report.checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if !report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Cmd::Bench { input, repeat, voxel, lambda, csv } => {
            let cloud = load(&input)?;
            let cfg = PipelineConfig { voxel, lambdas: lambda, graph: SpGraphConfig::for_voxel(voxel.max(1e-3)), ..Default::default() };
            let out: Box<dyn Write> = match &csv {
                Some(p) => Box::new(BufWriter::new(create(p)?)),
                None => Box::new(std::io::stdout().lock()),
            };
            bench(&cloud, &cfg, repeat, out)?
        }
        Cmd::Synth { points, seed, out, ascii } => {
            let cloud = room_scene(&SceneConfig::with_points(points, seed));
            let format = if ascii { CloudFormat::PlyAscii } else { CloudFormat::PlyBinary };
            write_cloud_with_scalars(&cloud, &[], &out, format)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Sizes the global pool from `--threads`, capped by `SUPERPART_THREADS`.
fn setup_threads(requested: Option<usize>) -> Result<()> {
    let cap = match std::env::var("SUPERPART_THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().context("SUPERPART_THREADS must be a positive integer")?),
        Err(_) => None,
    };
    let n = match (requested, cap) {
        (Some(r), Some(c)) => r.min(c),
        (Some(r), None) => r,
        (None, Some(c)) => c.min(std::thread::available_parallelism().map_or(1, |n| n.get())),
        (None, None) => return Ok(()),
    };
    if n == 0 {
        bail!("thread count must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn load(path: &Path) -> Result<PointCloud> {
    read_cloud(path, &PropertyMap::default()).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn read_container(path: &Path) -> Result<Sph1> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_sph1(BufReader::new(f))?)
}

fn write_container(path: &Path, data: &Sph1) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    write_sph1(&mut w, data)?;
    w.flush()?;
    Ok(())
}

fn features(input: &Path, voxel: f64, k: usize, mu: f64, out: &Path) -> Result<()> {
    let cloud = load(input)?;
    let cloud = if voxel > 0.0 { voxel_subsample(&cloud, voxel)?.0 } else { cloud };
    let cfg = FeatureConfig { k_feat: k, mu, include_spatial: mu > 0.0, ..Default::default() };
    let table = assemble_point_features(&cloud, &cfg)?;
    let mut columns: Vec<(String, Vec<f64>)> =
        GEOMETRIC_NAMES.iter().enumerate().map(|(j, n)| (n.to_string(), table.geometric.iter().map(|g| g[j]).collect())).collect();
    if let Some(s) = &table.spatial {
        for (j, n) in ["spatial_x", "spatial_y", "spatial_z"].iter().enumerate() {
            columns.push((n.to_string(), s.iter().map(|p| p[j]).collect()));
        }
    }
    let extra: Vec<(&str, &[f64])> = columns.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    write_cloud_with_scalars(&cloud, &extra, out, CloudFormat::PlyBinary)?;
    eprintln!("{} points with {} features written to {}", cloud.len(), extra.len(), out.display());
    Ok(())
}

fn partition(input: &Path, cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let cloud = load(input)?;
    let result = run_pipeline(&cloud, cfg)?;
    let hp = &result.hierarchy;
    let data = Sph1::new(result.cloud.positions.clone(), result.cloud.labels.clone(), hp.clone());
    write_container(out, &data)?;
    let sizes: Vec<String> = (0..=hp.level_count()).map(|i| hp.size(i).to_string()).collect();
    eprintln!("level sizes {} written to {}", sizes.join(" / "), out.display());
    Ok(())
}

fn graph(path: &Path, level: usize, eps: f64, steps: usize, out: &Path) -> Result<()> {
    let mut data = read_container(path)?;
    let top = data.hierarchy.level_count();
    if level == 0 || level > top {
        bail!("level {level} outside 1..={top}");
    }
    if !(eps > 0.0) || steps == 0 {
        bail!("--eps must be positive and --steps at least 1");
    }
    // the library doubles the threshold per level, so rescale to level 1
    let eps1 = eps / 2f64.powi(level as i32 - 1);
    let cfg = SpGraphConfig { num_steps: steps, ..SpGraphConfig::for_voxel(eps1 / 3.0) };
    let g = build_superpoint_graph(&data.hierarchy, level, &data.positions, &cfg)?;
    eprintln!("level {level}: {} directed edges", g.edge_count());
    data.graphs[level - 1] = Some(g);
    write_container(out, &data)
}

fn oracle(path: &Path, level: usize, csv: &Path) -> Result<()> {
    let data = read_container(path)?;
    let Some(labels) = &data.labels else {
        bail!("{} stores no labels", path.display());
    };
    let oracle = oracle_assign(&data.hierarchy, labels, level)?;
    let classes = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
    let m = confusion_and_miou(&oracle.point_prediction, labels, classes)?;
    let mut w = BufWriter::new(create(csv)?);
    writeln!(w, "level,component_count,oracle_miou,oracle_oa")?;
    writeln!(w, "{level},{},{:.6},{:.6}", data.hierarchy.size(level), m.miou, m.oa)?;
    w.flush()?;
    eprintln!("level {level}: oracle mIoU {:.4}, OA {:.4}", m.miou, m.oa);
    Ok(())
}

fn bench(cloud: &PointCloud, cfg: &PipelineConfig, repeat: usize, mut out: impl Write) -> Result<()> {
    if repeat == 0 {
        bail!("--repeat must be at least 1");
    }
    writeln!(out, "run,stage,millis")?;
    for r in 0..repeat {
        let result = run_pipeline(cloud, cfg)?;
        for t in &result.timings {
            writeln!(out, "{r},{},{:.3}", t.stage, t.millis)?;
        }
        let total: f64 = result.timings.iter().map(|t| t.millis).sum();
        writeln!(out, "{r},total,{total:.3}")?;
    }
    out.flush()?;
    Ok(())
}
