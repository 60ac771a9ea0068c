//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::error::Error as StdError;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use sweepcarve::carve::{make_bounding_volume, obstacle_representation, BoundingKind};
use sweepcarve::collide::{trajectory_collision_free, ObstacleChecker};
use sweepcarve::decimate::{containment_margin, decimate, DecimationParams};
use sweepcarve::geometry::{box_mesh, Aabb, MeshQuery, Point, RigidTransform, TriangleMesh, Vec3};
use sweepcarve::grid::GridSpec;
use sweepcarve::harness::{
    generate_exploration, generate_exploration_from, monte_carlo_volume, sample_inside, sample_surface,
    uniform_points, BruteForceMesh, ExplorationParams, Scene,
};
use sweepcarve::kinematics::{resample_for_sweep, save_chain, Joint, JointTrajectory, KinematicChain, Link};
use sweepcarve::pipeline::{merge_sessions, run_pipeline, run_sessions, PipelineConfig, PipelineOutput, PipelineSettings};
use sweepcarve::sweep::sweep_trajectory;

type Res<T> = Result<T, Box<dyn StdError>>;

const SAMPLES: usize = 4009;
const STEP: f64 = 0.01;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Res<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

/// Box-cell session and the criterion 7 pipeline run it feeds.
struct BoxCell {
    scene: Scene,
    traj: JointTrajectory,
    out: PipelineOutput,
    wall_time: f64,
    vo_bytes: Vec<u8>,
    dir: tempfile::TempDir,
}

fn write_config(dir: &Path, chain_path: &Path, sessions: &[(&str, &Path)], spacing: f64, workers: usize, out: &str) -> Res<std::path::PathBuf> {
    let config = serde_json::json!({
        "chain": chain_path,
        "sessions": sessions.iter().map(|(id, p)| serde_json::json!({"id": id, "trajectory": p})).collect::<Vec<_>>(),
        "grid": {"spacing": spacing},
        "bounding": {"kind": "cube"},
        "workers": workers,
        "output_dir": dir.join(out),
    });
    let path = dir.join(format!("{out}.json"));
    fs::write(&path, serde_json::to_string_pretty(&config)?)?;
    Ok(path)
}

fn box_cell_run() -> Res<BoxCell> {
    let scene = Scene::box_cell();
    let traj = generate_exploration(&scene, 7, &ExplorationParams::new(SAMPLES, STEP))?;
    let dir = tempfile::tempdir()?;
    let chain_path = save_chain(&scene.chain, dir.path().join("chain"))?;
    let traj_path = dir.path().join("session1.csv");
    traj.save(&traj_path)?;
    let cfg = write_config(dir.path(), &chain_path, &[("s1", &traj_path)], 0.02, 4, "run_a")?;
    let start = Instant::now();
    let out = run_pipeline(&PipelineConfig::load(&cfg)?)?;
    let wall_time = start.elapsed().as_secs_f64();
    let vo_bytes = fs::read(dir.path().join("run_a").join("v_o.obj"))?;
    Ok(BoxCell {
        scene,
        traj,
        out,
        wall_time,
        vo_bytes,
        dir,
    })
}

/// Points on and inside every obstacle, `n` in total.
fn obstacle_samples(scene: &Scene, n: usize, seed: u64) -> Res<Vec<Point>> {
    let per = n / (2 * scene.obstacles.len());
    let mut pts = Vec::with_capacity(n);
    for (i, o) in scene.obstacles.iter().enumerate() {
        let s = seed + 2 * i as u64;
        pts.extend(sample_surface(o, per, s));
        pts.extend(sample_inside(&BruteForceMesh::new(o.clone()), per, s + 1)?);
    }
    Ok(pts)
}

fn soundness_misses(scene: &Scene, vo: &TriangleMesh, seed: u64) -> Res<(usize, usize)> {
    let pts = obstacle_samples(scene, 100_000, seed)?;
    let inside = BruteForceMesh::new(vo.clone()).classify(&pts);
    Ok((inside.iter().filter(|&&b| !b).count(), pts.len()))
}

fn c1(bc: &BoxCell) -> Res<Outcome> {
    let t = Instant::now();
    let (miss_box, n_box) = soundness_misses(&bc.scene, &bc.out.model.mesh, 11)?;
    let box_time = bc.wall_time + t.elapsed().as_secs_f64();

    let t = Instant::now();
    let wall = Scene::wall();
    let traj = generate_exploration(&wall, 3, &ExplorationParams::new(SAMPLES, STEP))?;
    let out = run_sessions(&wall.chain, &[("s1".into(), traj)], &PipelineSettings::new(GridSpec::new(0.02)))?;
    let (miss_wall, n_wall) = soundness_misses(&wall, &out.model.mesh, 13)?;
    let wall_time = t.elapsed().as_secs_f64();

    outcome(
        miss_box == 0 && miss_wall == 0 && box_time < 60.0 && wall_time < 60.0,
        format!(
            "wall {miss_wall}/{n_wall} misses in {wall_time:.1} s, box-cell {miss_box}/{n_box} misses in {box_time:.1} s (budget 60 s each)"
        ),
    )
}

fn c2(bc: &BoxCell) -> Res<Outcome> {
    let chain = &bc.scene.chain;
    let dense = resample_for_sweep(&bc.traj, chain, 0.01)?;
    let checker = ObstacleChecker::new(&bc.out.model)?;
    let report = trajectory_collision_free(chain, &dense, &checker, 0.0)?;
    let budget = checker.margin_budget();
    outcome(
        report.collisions == 0 && report.max_penetration <= budget,
        format!(
            "{} samples, max penetration {:.4} m vs margin budget {:.4} m, {} near contacts, {} collisions",
            report.samples, report.max_penetration, budget, report.near_contacts, report.collisions
        ),
    )
}

fn c3(bc: &BoxCell) -> Res<Outcome> {
    let chain = &bc.scene.chain;
    let spacing = 0.02;
    let dense = resample_for_sweep(&bc.traj, chain, spacing / 2.0)?;
    let svs = &bc.out.swept[0];
    let budget = bc.out.report.sessions[0].sweep.iter().map(|s| s.margin_budget).fold(0.0, f64::max);
    let mut worst_rate: f64 = 1.0;
    let mut residual_ok = true;
    let mut total_fail = 0;
    for (i, sv) in svs.meshes.iter().enumerate() {
        let body = BruteForceMesh::new(chain.link_body(i).clone());
        let local_box = body.mesh().aabb();
        let poses: Vec<(RigidTransform, Aabb)> = dense
            .configs()
            .map(|q| {
                let pose = chain.forward_kinematics(q).expect("valid config")[i];
                let inv = pose.inverse();
                let mut b = Aabb::empty();
                for v in &body.mesh().vertices {
                    b.grow(&pose.apply(v));
                }
                (inv, b)
            })
            .collect();
        let sv_query = MeshQuery::new(sv.clone());
        let pts = sample_inside(&BruteForceMesh::new(sv.clone()), 100_000, 100 + i as u64)?;
        let failures: Vec<Point> = pts
            .par_iter()
            .filter(|p| {
                !poses
                    .iter()
                    .any(|(inv, b)| b.contains(p) && local_box.contains(&inv.apply(p)) && body.contains(&inv.apply(p)))
            })
            .cloned()
            .collect();
        worst_rate = worst_rate.min(1.0 - failures.len() as f64 / pts.len() as f64);
        total_fail += failures.len();
        residual_ok &= failures.iter().all(|p| sv_query.unsigned_distance(p) <= budget);
    }
    outcome(
        worst_rate >= 0.999 && residual_ok,
        format!(
            "{} links x 1e5 interior samples, worst strict pass rate {:.5}, {} failures, all within margin budget: {}",
            svs.meshes.len(),
            worst_rate,
            total_fail,
            residual_ok
        ),
    )
}

fn slider() -> Res<KinematicChain> {
    let link = Link::new(
        "cube",
        box_mesh(Vec3::repeat(1.0)),
        Joint::prismatic(Vec3::x(), RigidTransform::identity(), [-5.0, 5.0]),
    );
    Ok(KinematicChain::new("slider", TriangleMesh::empty(), vec![link])?)
}

/// Bar of length `r_out - r_in`, width `w` and thickness `t`, offset from
/// the z axis so a full turn sweeps an annulus.
fn offset_bar(r_in: f64, r_out: f64, w: f64, t: f64) -> Res<KinematicChain> {
    let bar = sweepcarve::geometry::transform_mesh(
        &box_mesh(Vec3::new(r_out - r_in, w, t)),
        &RigidTransform::from_translation(Vec3::new((r_in + r_out) / 2.0, 0.0, 0.0)),
    );
    let link = Link::new("bar", bar, Joint::revolute(Vec3::z(), RigidTransform::identity(), [-PI, PI]));
    Ok(KinematicChain::new("bar", TriangleMesh::empty(), vec![link])?)
}

fn sweep_volume(chain: &KinematicChain, traj: &JointTrajectory, spacing: f64) -> Res<f64> {
    let sv = sweep_trajectory(chain, traj, &GridSpec::new(spacing).with_iso_offset(0.0))?;
    Ok(sv.meshes[0].volume()?)
}

fn c4() -> Res<Outcome> {
    let cube = slider()?;
    let slide = JointTrajectory::from_configs((0..=40).map(|i| vec![2.0 * i as f64 / 40.0]).collect(), 25.0)?;
    let cube_exact = 3.0;
    let cube_err = |s: f64| -> Res<f64> { Ok((sweep_volume(&cube, &slide, s)? - cube_exact).abs() / cube_exact) };

    let (r_in, r_out, w, t) = (0.3, 1.0, 0.1, 0.1);
    let bar = offset_bar(r_in, r_out, w, t)?;
    let turn = JointTrajectory::from_configs((0..=360).map(|i| vec![-PI + 2.0 * PI * i as f64 / 360.0]).collect(), 25.0)?;
    // outer radius is reached at the far corners, inner at the near face
    let bar_exact = t * PI * (r_out * r_out + w * w / 4.0 - r_in * r_in);
    let bar_err = |s: f64| -> Res<f64> { Ok((sweep_volume(&bar, &turn, s)? - bar_exact).abs() / bar_exact) };

    let (cube_fine, cube_coarse) = (cube_err(0.02)?, cube_err(0.04)?);
    let (bar_fine, bar_coarse) = (bar_err(0.02)?, bar_err(0.04)?);
    outcome(
        cube_fine <= 0.03 && bar_fine <= 0.03 && cube_fine < cube_coarse && bar_fine < bar_coarse,
        format!(
            "cube error {:.3}% (0.04: {:.3}%), annulus error {:.3}% (0.04: {:.3}%), analytic annulus {:.5} m^3",
            100.0 * cube_fine,
            100.0 * cube_coarse,
            100.0 * bar_fine,
            100.0 * bar_coarse,
            bar_exact
        ),
    )
}

fn c5(bc: &BoxCell) -> Res<Outcome> {
    let sv = &bc.out.swept[0].meshes[1];
    let params = DecimationParams {
        target_reduction: 0.6364,
        ..Default::default()
    };
    let d = decimate(sv, &params)?;
    let margin = containment_margin(&d.mesh, sv, 100_000)?;
    let r = d.stats.achieved_reduction;
    outcome(
        (r - 0.6364).abs() <= 0.02 && margin <= 1e-6,
        format!(
            "{} -> {} faces, reduction {:.2}%, containment margin {:.2e} m",
            d.stats.faces_before,
            d.stats.faces_after,
            100.0 * r,
            margin
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn c6(bc: &BoxCell) -> Res<Outcome> {
    let chain = &bc.scene.chain;
    let spec = GridSpec::new(0.01);
    let run = run_sessions(chain, &[("s1".into(), bc.traj.clone())], &PipelineSettings::new(spec))?;
    let raw = merge_sessions(&run.swept)?;
    let dec = merge_sessions(&run.carved_from)?;
    let bv = make_bounding_volume(chain, BoundingKind::Cube, 1.0)?;
    let carve_spec = GridSpec { iso_offset: None, ..spec };
    let time = |svs: &[sweepcarve::carve::SweptSource]| -> Res<f64> {
        let t = Instant::now();
        obstacle_representation(&bv, svs, &carve_spec, 0.0, 1.0)?;
        Ok(t.elapsed().as_secs_f64())
    };
    let mut t_raw = Vec::new();
    let mut t_dec = Vec::new();
    for _ in 0..5 {
        t_raw.push(time(&raw)?);
        t_dec.push(time(&dec)?);
    }
    let faces = |s: &[sweepcarve::carve::SweptSource]| s.iter().map(|x| x.mesh.faces.len()).sum::<usize>();
    let (m_raw, m_dec) = (median(t_raw), median(t_dec));
    outcome(
        m_dec < m_raw,
        format!(
            "median carve time decimated {:.2} s ({} faces) vs raw {:.2} s ({} faces), ratio {:.2}",
            m_dec,
            faces(&dec),
            m_raw,
            faces(&raw),
            m_raw / m_dec
        ),
    )
}

fn c7(bc: &BoxCell) -> Res<Outcome> {
    let report: serde_json::Value = serde_json::from_slice(&fs::read(bc.dir.path().join("run_a").join("report.json"))?)?;
    let times = &report["mean_times"];
    let keys = ["exploration_ingest", "swept_volume", "decimation", "obstacle_representation"];
    let has_all = keys.iter().all(|k| times[k].is_number());
    outcome(
        bc.wall_time < 300.0 && has_all,
        format!(
            "{} samples at spacing 0.02 in {:.1} s (budget 300 s); step times {}",
            bc.traj.len(),
            bc.wall_time,
            keys.iter()
                .map(|k| format!("{k}={:.2}", times[k].as_f64().unwrap_or(f64::NAN)))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    )
}

fn c8(bc: &BoxCell) -> Res<Outcome> {
    let chain_path = bc.dir.path().join("chain").join("chain.json");
    let traj_path = bc.dir.path().join("session1.csv");
    let cfg = write_config(bc.dir.path(), &chain_path, &[("s1", &traj_path)], 0.02, 1, "run_b")?;
    run_pipeline(&PipelineConfig::load(&cfg)?)?;
    let other = fs::read(bc.dir.path().join("run_b").join("v_o.obj"))?;
    outcome(
        other == bc.vo_bytes,
        format!("v_o.obj with 4 workers vs 1 worker: {} vs {} bytes, identical: {}", bc.vo_bytes.len(), other.len(), other == bc.vo_bytes),
    )
}

fn c9(bc: &BoxCell) -> Res<Outcome> {
    let scene = &bc.scene;
    // start from the opposite side of the cell
    let mut start = scene.seed_config.clone();
    start[0] += if start[0] > 0.0 { -PI } else { PI };
    let second = generate_exploration_from(scene, &start, 19, &ExplorationParams::new(SAMPLES, STEP))?;
    let both = run_sessions(
        &scene.chain,
        &[("s1".into(), bc.traj.clone()), ("s2".into(), second)],
        &PipelineSettings::new(GridSpec::new(0.02)),
    )?;
    let region = bc.out.model.mesh.aabb().expanded(0.01);
    let n = 1_000_000;
    let one = monte_carlo_volume(&BruteForceMesh::new(bc.out.model.mesh.clone()), &region, n, 5);
    let two = monte_carlo_volume(&BruteForceMesh::new(both.model.mesh.clone()), &region, n, 6);
    let drop = one.volume - two.volume;
    let se = (one.std_error.powi(2) + two.std_error.powi(2)).sqrt();
    outcome(
        drop > 3.0 * se,
        format!(
            "V_O volume {:.4} -> {:.4} m^3, decrease {:.4} m^3 = {:.1} standard errors",
            one.volume,
            two.volume,
            drop,
            drop / se
        ),
    )
}

fn c10(bc: &BoxCell) -> Res<Outcome> {
    let mesh = &bc.out.model.mesh;
    let oracle = BruteForceMesh::new(mesh.clone());
    let query = MeshQuery::new(mesh.clone());
    let pts = uniform_points(&mesh.aabb().expanded(0.05), 1_000_000, 23);
    let truth = oracle.classify(&pts);
    let disagree = pts
        .par_iter()
        .zip(&truth)
        .filter(|(p, &inside)| {
            let sd = query.signed_distance(p).expect("closed mesh");
            (sd < 0.0) != inside
        })
        .count();
    outcome(
        disagree == 0,
        format!("{} points on a {}-face mesh, {} disagreements", pts.len(), mesh.faces.len(), disagree),
    )
}

fn report(n: usize, name: &str, result: Res<Outcome>, failed: &mut usize) {
    let (pass, detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    if !pass {
        *failed += 1;
    }
    println!("{} criterion {n} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
}

fn main() {
    let mut failed = 0;
    let bc = match box_cell_run() {
        Ok(bc) => bc,
        Err(e) => {
            println!("FAIL box-cell pipeline run: {e}");
            std::process::exit(1);
        }
    };
    report(1, "obstacle soundness", c1(&bc), &mut failed);
    report(2, "exploration vs own V_O", c2(&bc), &mut failed);
    report(3, "swept volume under-approximation", c3(&bc), &mut failed);
    report(4, "analytic sweeps", c4(), &mut failed);
    report(5, "decimation reduction and containment", c5(&bc), &mut failed);
    report(6, "decimated carve is faster", c6(&bc), &mut failed);
    report(7, "end-to-end budget", c7(&bc), &mut failed);
    report(8, "determinism across workers", c8(&bc), &mut failed);
    report(9, "session monotonicity", c9(&bc), &mut failed);
    report(10, "oracle cross-validation", c10(&bc), &mut failed);
    if failed > 0 {
        println!("{failed} of 10 criteria failed");
        std::process::exit(1);
    }
}
