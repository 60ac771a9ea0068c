//! End-to-end orchestration: sweep every session, optionally decimate,
//! carve the obstacle model, and report timings.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::carve::{make_bounding_volume, obstacle_representation, BoundingKind, ObstacleModel, SweptSource};
use crate::decimate::{decimate_all, DecimationParams, DecimationStats};
use crate::geometry::{save_mesh, TriangleMesh};
use crate::grid::GridSpec;
use crate::kinematics::{
    load_chain, load_trajectory, resample_for_sweep, JointTrajectory, KinematicChain, LimitPolicy,
};
use crate::sweep::{compute_swept_volumes, LinkSweepStats};
use crate::{par, Error, Result};

/// Grid settings as written in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub spacing: f64,
    /// Defaults to three times the spacing.
    #[serde(default)]
    pub padding: Option<f64>,
    /// Defaults to the automatic conservative value.
    #[serde(default)]
    pub iso_offset: Option<f64>,
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            spacing: self.spacing,
            padding: self.padding.unwrap_or(3.0 * self.spacing),
            iso_offset: self.iso_offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkipWord {
    Skip,
}

/// Either decimation parameters or the string `"skip"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DecimationSetting {
    Skip(SkipWord),
    Run(DecimationParams),
}

impl DecimationSetting {
    pub fn params(&self) -> Option<DecimationParams> {
        match self {
            DecimationSetting::Skip(_) => None,
            DecimationSetting::Run(p) => Some(*p),
        }
    }
}

impl Default for DecimationSetting {
    fn default() -> Self {
        DecimationSetting::Run(DecimationParams::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingConfig {
    pub kind: BoundingKind,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for BoundingConfig {
    fn default() -> Self {
        BoundingConfig {
            kind: BoundingKind::Cube,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub id: String,
    pub trajectory: PathBuf,
}

/// Pipeline config file. Relative paths are resolved against the
/// directory containing the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub chain: PathBuf,
    pub sessions: Vec<SessionConfig>,
    pub grid: GridConfig,
    /// Grid of the carving step; defaults to `grid`.
    #[serde(default)]
    pub carve_grid: Option<GridConfig>,
    #[serde(default)]
    pub decimation: DecimationSetting,
    #[serde(default)]
    pub bounding: BoundingConfig,
    pub output_dir: PathBuf,
    #[serde(default = "one_rep")]
    pub repetitions: usize,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub limit_policy: LimitPolicy,
}

fn one_rep() -> usize {
    1
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let mut config: PipelineConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.chain = base.join(&config.chain);
        config.output_dir = base.join(&config.output_dir);
        for s in &mut config.sessions {
            s.trajectory = base.join(&s.trajectory);
        }
        Ok(config)
    }

    pub fn settings(&self) -> Result<PipelineSettings> {
        if self.sessions.is_empty() {
            return Err(Error::Schema {
                field: "sessions".into(),
                message: "at least one session is required".into(),
            });
        }
        let settings = PipelineSettings {
            grid: self.grid.spec(),
            carve_grid: self.carve_grid.map(|g| g.spec()),
            decimation: self.decimation.params(),
            bounding: self.bounding,
            repetitions: self.repetitions,
            workers: self.workers,
        };
        settings.validate()?;
        Ok(settings)
    }
}

/// In-memory pipeline settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineSettings {
    pub grid: GridSpec,
    pub carve_grid: Option<GridSpec>,
    pub decimation: Option<DecimationParams>,
    pub bounding: BoundingConfig,
    pub repetitions: usize,
    pub workers: Option<usize>,
}

impl PipelineSettings {
    pub fn new(grid: GridSpec) -> Self {
        PipelineSettings {
            grid,
            carve_grid: None,
            decimation: Some(DecimationParams::default()),
            bounding: BoundingConfig::default(),
            repetitions: 1,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if let Some(g) = &self.carve_grid {
            g.validate()?;
        }
        if let Some(d) = &self.decimation {
            d.validate()?;
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidParameter("workers must be at least 1".into()));
        }
        Ok(())
    }

    fn carve_spec(&self) -> GridSpec {
        self.carve_grid.unwrap_or(GridSpec {
            iso_offset: None,
            ..self.grid
        })
    }
}

/// Swept (and possibly decimated) meshes of one exploration session.
#[derive(Debug, Clone)]
pub struct SessionVolumes {
    pub id: String,
    /// One closed mesh per link.
    pub meshes: Vec<TriangleMesh>,
    /// Conservativeness slack spent on these meshes.
    pub margin: f64,
}

/// Flattens sessions into carve inputs. All sessions must come from the
/// same chain, so they must have the same number of link meshes.
pub fn merge_sessions(sessions: &[SessionVolumes]) -> Result<Vec<SweptSource>> {
    let Some(first) = sessions.first() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for s in sessions {
        if s.meshes.len() != first.meshes.len() {
            return Err(Error::SessionMismatch(format!(
                "session `{}` has {} link meshes, session `{}` has {}",
                s.id,
                s.meshes.len(),
                first.id,
                first.meshes.len()
            )));
        }
        for (i, m) in s.meshes.iter().enumerate() {
            out.push(SweptSource {
                id: format!("link_{}", i + 1),
                session: s.id.clone(),
                mesh: m.clone(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTimes {
    pub exploration_ingest: f64,
    pub swept_volume: f64,
    pub decimation: f64,
    pub obstacle_representation: f64,
    pub total: f64,
}

impl StepTimes {
    fn add(&mut self, o: &StepTimes) {
        self.exploration_ingest += o.exploration_ingest;
        self.swept_volume += o.swept_volume;
        self.decimation += o.decimation;
        self.obstacle_representation += o.obstacle_representation;
        self.total += o.total;
    }

    fn scaled(&self, k: f64) -> StepTimes {
        StepTimes {
            exploration_ingest: self.exploration_ingest * k,
            swept_volume: self.swept_volume * k,
            decimation: self.decimation * k,
            obstacle_representation: self.obstacle_representation * k,
            total: self.total * k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub name: String,
    pub vertices: usize,
    pub faces: usize,
    pub volume: f64,
}

impl MeshSummary {
    fn of(name: impl Into<String>, mesh: &TriangleMesh) -> Result<Self> {
        Ok(MeshSummary {
            name: name.into(),
            vertices: mesh.vertices.len(),
            faces: mesh.faces.len(),
            volume: if mesh.is_empty() { 0.0 } else { mesh.volume()? },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub id: String,
    pub samples: usize,
    pub resampled_samples: usize,
    pub sweep: Vec<LinkSweepStats>,
    pub decimation: Option<Vec<DecimationStats>>,
    pub meshes: Vec<MeshSummary>,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Mean wall time per step over all repetitions, in seconds.
    pub mean_times: StepTimes,
    pub repetitions: usize,
    pub workers: usize,
    pub sessions: Vec<SessionReport>,
    pub obstacle: MeshSummary,
    pub margin_budget: f64,
}

/// Everything a pipeline run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub model: ObstacleModel,
    /// Swept meshes before decimation, per session.
    pub swept: Vec<SessionVolumes>,
    /// Meshes handed to the carving step, per session.
    pub carved_from: Vec<SessionVolumes>,
    pub report: RunReport,
}

/// Runs sweep, decimation and carving on in-memory sessions.
pub fn run_sessions(
    chain: &KinematicChain,
    sessions: &[(String, JointTrajectory)],
    settings: &PipelineSettings,
) -> Result<PipelineOutput> {
    run_repeated(chain, sessions, settings, None)
}

/// Repeats the run for timing; artifacts are written on the last pass.
fn run_repeated(
    chain: &KinematicChain,
    sessions: &[(String, JointTrajectory)],
    settings: &PipelineSettings,
    artifacts: Option<&Path>,
) -> Result<PipelineOutput> {
    settings.validate()?;
    par::with_workers(settings.workers, || {
        let mut totals = StepTimes::default();
        let mut last = None;
        for rep in 0..settings.repetitions {
            let dir = artifacts.filter(|_| rep + 1 == settings.repetitions);
            let (out, times) = run_once(chain, sessions, settings, dir)?;
            totals.add(&times);
            last = Some(out);
        }
        let mut out = last.expect("at least one repetition");
        out.report.mean_times = totals.scaled(1.0 / settings.repetitions as f64);
        out.report.repetitions = settings.repetitions;
        Ok(out)
    })
}

fn run_once(
    chain: &KinematicChain,
    sessions: &[(String, JointTrajectory)],
    settings: &PipelineSettings,
    artifacts: Option<&Path>,
) -> Result<(PipelineOutput, StepTimes)> {
    let start = Instant::now();
    let mut times = StepTimes::default();
    let grid = settings.grid;

    let t = Instant::now();
    let resampled = sessions
        .iter()
        .map(|(id, traj)| {
            resample_for_sweep(traj, chain, grid.spacing / 2.0).map_err(|e| e.in_step(&format!("ingest {id}")))
        })
        .collect::<Result<Vec<_>>>()?;
    times.exploration_ingest = t.elapsed().as_secs_f64();

    let mut swept = Vec::new();
    let mut carved_from = Vec::new();
    let mut corner_factor: f64 = 1.0;
    let mut reports = Vec::new();
    for ((id, traj), dense) in sessions.iter().zip(&resampled) {
        let t = Instant::now();
        let sv = compute_swept_volumes(chain, dense, &grid).map_err(|e| e.in_step("swept_volume"))?;
        times.swept_volume += t.elapsed().as_secs_f64();
        corner_factor = corner_factor.max(sv.corner_factor);
        if let Some(dir) = artifacts {
            write_meshes(&dir.join("sessions").join(id), "sv_link", &sv.meshes)?;
        }

        let t = Instant::now();
        let (meshes, margin, dec_stats) = match &settings.decimation {
            Some(params) => {
                let dec = decimate_all(&sv.meshes, params).map_err(|e| e.in_step("decimation"))?;
                let slack = dec
                    .iter()
                    .map(|d| d.stats.max_retreat)
                    .fold(0.0, f64::max);
                let stats = dec.iter().map(|d| d.stats.clone()).collect();
                (dec.into_iter().map(|d| d.mesh).collect::<Vec<_>>(), sv.margin_budget + slack, Some(stats))
            }
            None => (sv.meshes.clone(), sv.margin_budget, None),
        };
        times.decimation += t.elapsed().as_secs_f64();
        if let (Some(dir), Some(_)) = (artifacts, &dec_stats) {
            write_meshes(&dir.join("sessions").join(id), "svd_link", &meshes)?;
        }

        reports.push(SessionReport {
            id: id.clone(),
            samples: traj.len(),
            resampled_samples: dense.len(),
            sweep: sv.stats.clone(),
            decimation: dec_stats,
            meshes: meshes
                .iter()
                .enumerate()
                .map(|(i, m)| MeshSummary::of(format!("link_{}", i + 1), m))
                .collect::<Result<_>>()?,
            margin,
        });
        swept.push(SessionVolumes {
            id: id.clone(),
            meshes: sv.meshes,
            margin: sv.margin_budget,
        });
        carved_from.push(SessionVolumes {
            id: id.clone(),
            meshes,
            margin,
        });
    }

    let t = Instant::now();
    let sources = merge_sessions(&carved_from)?;
    let input_margin = carved_from.iter().map(|s| s.margin).fold(0.0, f64::max);
    let bv = make_bounding_volume(chain, settings.bounding.kind, settings.bounding.scale)
        .map_err(|e| e.in_step("obstacle_representation"))?;
    let model = obstacle_representation(&bv, &sources, &settings.carve_spec(), input_margin, corner_factor)
        .map_err(|e| e.in_step("obstacle_representation"))?;
    times.obstacle_representation = t.elapsed().as_secs_f64();
    times.total = start.elapsed().as_secs_f64();

    let report = RunReport {
        mean_times: times,
        repetitions: 1,
        workers: par::current_workers(),
        sessions: reports,
        obstacle: MeshSummary::of("v_o", &model.mesh)?,
        margin_budget: model.margin_budget(),
    };
    Ok((
        PipelineOutput {
            model,
            swept,
            carved_from,
            report,
        },
        times,
    ))
}

fn write_meshes(dir: &Path, prefix: &str, meshes: &[TriangleMesh]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, m) in meshes.iter().enumerate() {
        save_mesh(m, dir.join(format!("{prefix}_{}.obj", i + 1)))?;
    }
    Ok(())
}

/// Runs a config file end to end and writes `v_o.obj`, `v_o.json`,
/// `report.json` and per-session link meshes into the output directory.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    let settings = config.settings()?;
    let out_dir = &config.output_dir;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let chain = load_chain(&config.chain).map_err(|e| e.in_step("exploration_ingest"))?;
    let sessions = config
        .sessions
        .iter()
        .map(|s| {
            load_trajectory(&s.trajectory, &chain, config.limit_policy)
                .map(|t| (s.id.clone(), t))
                .map_err(|e| e.in_step("exploration_ingest"))
        })
        .collect::<Result<Vec<_>>>()?;

    let output = run_repeated(&chain, &sessions, &settings, Some(out_dir))?;

    output
        .model
        .save(&out_dir.join("v_o.obj"), &out_dir.join("v_o.json"))?;
    let report_path = out_dir.join("report.json");
    let text = serde_json::to_string_pretty(&output.report).expect("report serializes");
    fs::write(&report_path, text).map_err(|e| Error::io(&report_path, e))?;
    Ok(output)
}
