use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use sweepcarve::carve::{obstacle_representation, BoundingKind, BoundingVolume, ObstacleModel, SweptSource};
use sweepcarve::collide::{trajectory_collision_free, ObstacleChecker};
use sweepcarve::decimate::{decimate_all, DecimationParams, DecimationStats};
use sweepcarve::geometry::{load_mesh, save_mesh, Aabb, MeshQuery, Point, TriangleMesh};
use sweepcarve::grid::GridSpec;
use sweepcarve::harness::{
    generate_exploration, monte_carlo_volume, uniform_points, BruteForceMesh, ExplorationParams, Scene,
    SceneKind,
};
use sweepcarve::kinematics::{load_chain, load_trajectory, resample_for_sweep, save_chain, LimitPolicy};
use sweepcarve::pipeline::{run_pipeline, PipelineConfig};
use sweepcarve::sweep::{compute_swept_volumes, LinkSweepStats};
use sweepcarve::par;

#[derive(Parser)]
#[command(name = "sweepcarve", version, about = "Obstacle models from robot exploration")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep every link along a joint trajectory.
    Sweep(SweepArgs),
    /// Conservatively decimate swept-volume meshes.
    Decimate(DecimateArgs),
    /// Carve the obstacle model out of the bounding volume.
    Carve(CarveArgs),
    /// Check a trajectory against an obstacle model (exit code 2 on collision).
    Check(CheckArgs),
    /// Run the whole pipeline from a config file.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Synthetic scenes and the Monte Carlo oracle.
    #[command(subcommand)]
    Harness(HarnessCommand),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    chain: PathBuf,
    #[arg(long)]
    traj: PathBuf,
    #[arg(long)]
    spacing: f64,
    /// Erosion in meters, or `auto`.
    #[arg(long, default_value = "auto")]
    iso_offset: String,
    #[arg(long)]
    padding: Option<f64>,
    /// Clamp out-of-limit samples instead of rejecting the file.
    #[arg(long)]
    clamp: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DecimateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.6)]
    target: f64,
    #[arg(long, default_value_t = 0.005)]
    max_error: f64,
    #[arg(long)]
    no_preserve_topology: bool,
}

#[derive(Args)]
struct CarveArgs {
    /// `auto-cube` or `auto-sphere`.
    #[arg(long, default_value = "auto-cube")]
    bv: String,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Directories written by `sweep` or `decimate`; one per session.
    #[arg(long, num_args = 1.., required = true)]
    svs: Vec<PathBuf>,
    #[arg(long)]
    spacing: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    chain: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    traj: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    clearance: f64,
    /// Insert interpolated samples so the clearance precondition holds.
    #[arg(long)]
    resample: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum HarnessCommand {
    /// Generate an exploration trajectory for a built-in scene.
    Gen {
        #[arg(long)]
        scene: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 4009)]
        n: usize,
        /// Displacement bound per sample in meters.
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the scene's chain (chain.json + meshes) and obstacles here.
        #[arg(long)]
        scene_dir: Option<PathBuf>,
    },
    /// Monte Carlo volume of a closed mesh by brute-force classification.
    Oracle {
        #[arg(long)]
        mesh: PathBuf,
        /// `auto` or `xmin,ymin,zmin,xmax,ymax,zmax`.
        #[arg(long, default_value = "auto")]
        aabb: String,
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Also compare every sample with the accelerated inside test.
        #[arg(long)]
        cross_check: bool,
    },
}

/// Written by `sweep`, read by `decimate` and `carve`.
#[derive(Serialize, Deserialize)]
struct SweepStatsFile {
    chain: String,
    reach_bound: f64,
    spacing: f64,
    samples: usize,
    resampled_samples: usize,
    corner_factor: f64,
    margin_budget: f64,
    links: Vec<LinkSweepStats>,
}

/// Written by `decimate`, read by `carve`.
#[derive(Serialize, Deserialize)]
struct DecimateStatsFile {
    reach_bound: f64,
    corner_factor: f64,
    /// Sweep margin plus the largest decimation slack.
    margin_budget: f64,
    meshes: Vec<DecimationStats>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let workers = cli.workers;
    match par::with_workers(workers, || run(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Sweep(a) => sweep(a)?,
        Command::Decimate(a) => decimate(a)?,
        Command::Carve(a) => carve(a)?,
        Command::Check(a) => return check(a),
        Command::Pipeline { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let out = run_pipeline(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&out.report)?);
        }
        Command::Harness(h) => harness(h)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// `<prefix>_1.obj`, `<prefix>_2.obj`, ... until the first gap.
fn read_link_meshes(dir: &Path, prefix: &str) -> Result<Vec<TriangleMesh>> {
    let mut out = Vec::new();
    loop {
        let path = dir.join(format!("{prefix}_{}.obj", out.len() + 1));
        if !path.exists() {
            break;
        }
        out.push(load_mesh(&path)?);
    }
    Ok(out)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let chain = load_chain(&a.chain)?;
    let policy = if a.clamp { LimitPolicy::Clamp } else { LimitPolicy::Reject };
    let traj = load_trajectory(&a.traj, &chain, policy)?;
    let mut spec = GridSpec::new(a.spacing);
    if let Some(p) = a.padding {
        spec = spec.with_padding(p);
    }
    if a.iso_offset != "auto" {
        let off: f64 = a.iso_offset.parse().context("--iso-offset must be a number or `auto`")?;
        spec = spec.with_iso_offset(off);
    }
    spec.validate()?;
    let dense = resample_for_sweep(&traj, &chain, spec.spacing / 2.0)?;
    let sv = compute_swept_volumes(&chain, &dense, &spec)?;
    fs::create_dir_all(&a.out_dir)?;
    for (i, m) in sv.meshes.iter().enumerate() {
        save_mesh(m, a.out_dir.join(format!("sv_link_{}.obj", i + 1)))?;
    }
    let stats = SweepStatsFile {
        chain: chain.name.clone(),
        reach_bound: chain.reach_bound(),
        spacing: spec.spacing,
        samples: traj.len(),
        resampled_samples: dense.len(),
        corner_factor: sv.corner_factor,
        margin_budget: sv.margin_budget,
        links: sv.stats,
    };
    write_json(&a.out_dir.join("sweep_stats.json"), &stats)
}

fn decimate(a: DecimateArgs) -> Result<()> {
    let sweep: SweepStatsFile = read_json(&a.input.join("sweep_stats.json"))?;
    let meshes = read_link_meshes(&a.input, "sv_link")?;
    if meshes.is_empty() {
        bail!("no sv_link_<i>.obj files in {}", a.input.display());
    }
    let params = DecimationParams {
        target_reduction: a.target,
        max_error: a.max_error,
        preserve_topology: !a.no_preserve_topology,
    };
    let out = decimate_all(&meshes, &params)?;
    fs::create_dir_all(&a.out)?;
    for (i, d) in out.iter().enumerate() {
        save_mesh(&d.mesh, a.out.join(format!("svd_link_{}.obj", i + 1)))?;
    }
    let slack = out
        .iter()
        .map(|d| d.stats.max_retreat)
        .fold(0.0, f64::max);
    let stats = DecimateStatsFile {
        reach_bound: sweep.reach_bound,
        corner_factor: sweep.corner_factor,
        margin_budget: sweep.margin_budget + slack,
        meshes: out.into_iter().map(|d| d.stats).collect(),
    };
    write_json(&a.out.join("decimate_stats.json"), &stats)
}

fn carve(a: CarveArgs) -> Result<()> {
    let kind: BoundingKind = a.bv.parse()?;
    let mut sources = Vec::new();
    let mut reach: f64 = 0.0;
    let mut margin: f64 = 0.0;
    let mut corner_factor: f64 = 1.0;
    for dir in &a.svs {
        let session = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        let (meshes, r, m, k) = if dir.join("decimate_stats.json").exists() {
            let s: DecimateStatsFile = read_json(&dir.join("decimate_stats.json"))?;
            (read_link_meshes(dir, "svd_link")?, s.reach_bound, s.margin_budget, s.corner_factor)
        } else {
            let s: SweepStatsFile = read_json(&dir.join("sweep_stats.json"))
                .with_context(|| format!("{} has neither decimate_stats.json nor sweep_stats.json", dir.display()))?;
            (read_link_meshes(dir, "sv_link")?, s.reach_bound, s.margin_budget, s.corner_factor)
        };
        reach = reach.max(r);
        margin = margin.max(m);
        corner_factor = corner_factor.max(k);
        for (i, mesh) in meshes.into_iter().enumerate() {
            sources.push(SweptSource {
                id: format!("link_{}", i + 1),
                session: session.clone(),
                mesh,
            });
        }
    }
    if !(a.scale >= 1.0) {
        bail!("--scale must be at least 1");
    }
    let bv = BoundingVolume::new(kind, [0.0; 3], a.scale * reach, a.scale)?;
    let model = obstacle_representation(&bv, &sources, &GridSpec::new(a.spacing), margin, corner_factor)?;
    model.save(&a.out, &a.model)?;
    println!("{}", serde_json::to_string_pretty(&model.meta)?);
    Ok(())
}

fn check(a: CheckArgs) -> Result<ExitCode> {
    let chain = load_chain(&a.chain)?;
    let model = ObstacleModel::load(&a.model)?;
    let mut traj = load_trajectory(&a.traj, &chain, LimitPolicy::Reject)?;
    if a.resample && a.clearance > 0.0 {
        traj = resample_for_sweep(&traj, &chain, a.clearance)?;
    }
    let checker = ObstacleChecker::new(&model)?;
    let report = trajectory_collision_free(&chain, &traj, &checker, a.clearance)?;
    let text = serde_json::to_string_pretty(&report)?;
    match &a.report {
        Some(p) => fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(if report.free { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn parse_aabb(s: &str) -> Result<Aabb> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse()).collect::<Result<_, _>>().context("--aabb needs six numbers")?;
    if v.len() != 6 {
        bail!("--aabb needs six comma-separated numbers, got {}", v.len());
    }
    Ok(Aabb::new(Point::new(v[0], v[1], v[2]), Point::new(v[3], v[4], v[5])))
}

fn harness(h: HarnessCommand) -> Result<()> {
    match h {
        HarnessCommand::Gen { scene, seed, n, step, out, scene_dir } => {
            let kind: SceneKind = scene.parse()?;
            let scene = Scene::build(kind);
            let traj = generate_exploration(&scene, seed, &ExplorationParams::new(n, step))?;
            traj.save(&out)?;
            if let Some(dir) = scene_dir {
                save_chain(&scene.chain, &dir)?;
                for (i, o) in scene.obstacles.iter().enumerate() {
                    save_mesh(o, dir.join(format!("obstacle_{}.obj", i + 1)))?;
                }
            }
        }
        HarnessCommand::Oracle { mesh, aabb, n, seed, cross_check } => {
            let mesh = load_mesh(&mesh)?;
            mesh.check_closed()?;
            let region = if aabb == "auto" {
                let b = mesh.aabb();
                b.expanded(0.05 * b.extent().amax())
            } else {
                parse_aabb(&aabb)?
            };
            let brute = BruteForceMesh::new(mesh.clone());
            let est = monte_carlo_volume(&brute, &region, n, seed);
            let mut out = serde_json::to_value(est)?;
            if cross_check {
                let fast = MeshQuery::new(mesh);
                let pts = uniform_points(&region, n, seed);
                let inside = brute.classify(&pts);
                let disagree = par::map_range(pts.len(), |i| fast.contains(&pts[i]) != inside[i])
                    .into_iter()
                    .filter(|&d| d)
                    .count();
                out["disagreements"] = disagree.into();
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    Ok(())
}
