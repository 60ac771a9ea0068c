//! Per-link swept volumes by SDF stamping.
//!
//! Each link's swept volume is the union of its body over all trajectory
//! poses. The union is realized as a pointwise minimum of signed distances on
//! an axis-aligned grid and extracted at a negative iso level, so the
//! returned mesh lies inside the true swept volume.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, MeshQuery, Point, RigidTransform, TriangleMesh};
use crate::grid::{GridFrame, GridSpec, SdfGrid, HALF_DIAGONAL};
use crate::kinematics::{resample_for_sweep, JointTrajectory, KinematicChain};
use crate::{par, Error, Result};

/// Per-link sweep summary (one row of the swept-volume table).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSweepStats {
    pub link: String,
    pub vertices: usize,
    pub faces: usize,
    pub volume: f64,
    pub wall_time_s: f64,
    pub poses: usize,
    pub grid_dims: [usize; 3],
    pub iso_offset: f64,
    pub corner_factor: f64,
    pub margin_budget: f64,
}

#[derive(Debug, Clone)]
pub struct SweptVolumes {
    /// One closed mesh per link, in link order.
    pub meshes: Vec<TriangleMesh>,
    pub stats: Vec<LinkSweepStats>,
    /// Largest per-link margin budget.
    pub margin_budget: f64,
    /// Largest link corner factor.
    pub corner_factor: f64,
}

fn world_box(local: &Aabb, pose: &RigidTransform) -> Aabb {
    let mut b = Aabb::empty();
    for c in 0..8 {
        let p = Point::new(
            if c & 1 == 0 { local.min.x } else { local.max.x },
            if c & 2 == 0 { local.min.y } else { local.max.y },
            if c & 4 == 0 { local.min.z } else { local.max.z },
        );
        b.grow(&pose.apply(&p));
    }
    b
}

/// Erosion used when the grid spec leaves it automatic.
pub fn auto_iso_offset(spacing: f64, max_step: f64) -> f64 {
    spacing * HALF_DIAGONAL + max_step
}

/// Stamps link `link_index` (0-based) at every trajectory pose.
///
/// Consecutive samples must already satisfy
/// `displacement_bound <= spacing / 2`.
pub fn compute_link_swept_sdf(
    chain: &KinematicChain,
    traj: &JointTrajectory,
    link_index: usize,
    spec: &GridSpec,
) -> Result<SdfGrid> {
    spec.validate()?;
    if traj.is_empty() {
        return Err(Error::Trajectory("empty trajectory".into()));
    }
    if link_index >= chain.dof() {
        return Err(Error::InvalidParameter(format!(
            "link index {link_index} out of range for {} links",
            chain.dof()
        )));
    }
    let s = spec.spacing;
    traj.check_resampled(chain, s / 2.0)?;
    let max_step = traj.max_step_bound(chain)?;
    let iso_offset = spec.iso_offset.unwrap_or_else(|| auto_iso_offset(s, max_step));
    let band = (iso_offset + 2.0 * s).max(spec.padding);

    let body = chain.link_body(link_index);
    let query = MeshQuery::new(body.clone());
    let local_box = query.aabb();

    // world poses, dropping exact consecutive duplicates
    let mut poses: Vec<RigidTransform> = Vec::with_capacity(traj.len());
    let mut last: Option<&[f64]> = None;
    for q in traj.configs() {
        if last == Some(q) {
            continue;
        }
        last = Some(q);
        poses.push(chain.forward_kinematics(q)?[link_index]);
    }

    let stamp_boxes: Vec<Aabb> = poses
        .iter()
        .map(|p| world_box(&local_box, p).expanded(2.0 * s))
        .collect();
    let content = if body.is_empty() {
        Aabb::new(Point::origin(), Point::origin())
    } else {
        poses
            .iter()
            .fold(Aabb::empty(), |acc, p| acc.union(&world_box(&local_box, p)))
    };
    let frame = GridFrame::covering(&content, s, spec.padding);
    let mut grid = SdfGrid::filled(frame, band);
    // erosion reaches deeper at sharp corners of the body
    grid.margin_budget = body.corner_factor() * (iso_offset + s * HALF_DIAGONAL + max_step);
    if body.is_empty() {
        return Ok(grid);
    }

    let ranges: Vec<Option<[[usize; 2]; 3]>> =
        stamp_boxes.iter().map(|b| frame.index_range(b)).collect();
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); frame.dims[2]];
    for (pi, r) in ranges.iter().enumerate() {
        if let Some(r) = r {
            for bin in &mut bins[r[2][0]..=r[2][1]] {
                bin.push(pi as u32);
            }
        }
    }
    let inverses: Vec<RigidTransform> = poses.iter().map(|p| p.inverse()).collect();
    let mesh = query.mesh();
    let band_sq = band * band;
    let nx = frame.dims[0];

    par::for_each_chunk_mut(&mut grid.values, frame.layer_len(), |k, slab| {
        for &pi in &bins[k] {
            let r = ranges[pi as usize].expect("binned poses have ranges");
            let inv = &inverses[pi as usize];
            for j in r[1][0]..=r[1][1] {
                for i in r[0][0]..=r[0][1] {
                    let slot = &mut slab[i + nx * j];
                    let current = *slot;
                    if current <= -band {
                        continue;
                    }
                    let local = inv.apply(&frame.position(i, j, k));
                    let lb_sq = local_box.distance_sq(&local);
                    // outside the body box the value is positive and at least the box distance
                    if lb_sq > 0.0 && (current < 0.0 || lb_sq >= current * current) {
                        continue;
                    }
                    let d = query
                        .bvh()
                        .closest(mesh, &local, band_sq)
                        .map_or(band, |(d, _)| d.sqrt());
                    if -d >= current {
                        continue;
                    }
                    let inside = lb_sq == 0.0 && query.contains(&local);
                    let sd = if inside { -d } else { d };
                    if sd < current {
                        *slot = sd;
                    }
                }
            }
        }
    });
    Ok(grid)
}

/// Closed surface of `{value < iso}`; fails if the level set reaches the
/// grid boundary.
pub fn extract_surface(grid: &SdfGrid, iso: f64) -> Result<TriangleMesh> {
    grid.extract(iso)
}

fn sweep_link(
    chain: &KinematicChain,
    traj: &JointTrajectory,
    link_index: usize,
    spec: &GridSpec,
) -> Result<(TriangleMesh, LinkSweepStats)> {
    let start = Instant::now();
    let grid = compute_link_swept_sdf(chain, traj, link_index, spec)?;
    let max_step = traj.max_step_bound(chain)?;
    let iso_offset = spec
        .iso_offset
        .unwrap_or_else(|| auto_iso_offset(spec.spacing, max_step));
    let mesh = extract_surface(&grid, -iso_offset)?;
    let volume = if mesh.is_empty() { 0.0 } else { mesh.volume()? };
    if mesh.is_empty() {
        log::warn!(
            "swept volume of {} is empty after eroding by {iso_offset:.4} m; use a finer spacing",
            chain.links[link_index].name
        );
    }
    let stats = LinkSweepStats {
        link: chain.links[link_index].name.clone(),
        vertices: mesh.vertices.len(),
        faces: mesh.faces.len(),
        volume,
        wall_time_s: start.elapsed().as_secs_f64(),
        poses: traj.len(),
        grid_dims: grid.frame.dims,
        iso_offset,
        corner_factor: chain.link_body(link_index).corner_factor(),
        margin_budget: grid.margin_budget,
    };
    Ok((mesh, stats))
}

/// Swept volume of every link, computed in parallel, in link order.
pub fn compute_swept_volumes(
    chain: &KinematicChain,
    traj: &JointTrajectory,
    spec: &GridSpec,
) -> Result<SweptVolumes> {
    let results = par::map_range(chain.dof(), |i| {
        sweep_link(chain, traj, i, spec).map_err(|e| e.in_link(&chain.links[i].name))
    });
    let mut meshes = Vec::with_capacity(results.len());
    let mut stats = Vec::with_capacity(results.len());
    for r in results {
        let (m, s) = r?;
        meshes.push(m);
        stats.push(s);
    }
    let margin_budget = stats.iter().map(|s| s.margin_budget).fold(0.0, f64::max);
    let corner_factor = stats.iter().map(|s| s.corner_factor).fold(1.0, f64::max);
    Ok(SweptVolumes {
        meshes,
        stats,
        margin_budget,
        corner_factor,
    })
}

/// Resamples `traj` to half the grid spacing, then sweeps every link.
pub fn sweep_trajectory(
    chain: &KinematicChain,
    traj: &JointTrajectory,
    spec: &GridSpec,
) -> Result<SweptVolumes> {
    let resampled = resample_for_sweep(traj, chain, spec.spacing / 2.0)?;
    compute_swept_volumes(chain, &resampled, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{box_mesh, Vec3};
    use crate::kinematics::{Joint, Link};

    /// One prismatic joint along x carrying a unit cube.
    fn slider() -> KinematicChain {
        let link = Link::new(
            "cube",
            box_mesh(Vec3::repeat(1.0)),
            Joint::prismatic(Vec3::x(), RigidTransform::identity(), [-5.0, 5.0]),
        );
        KinematicChain::new("slider", TriangleMesh::empty(), vec![link]).unwrap()
    }

    #[test]
    fn translated_cube_sweep_volume() {
        let chain = slider();
        let traj = JointTrajectory::from_configs(
            (0..=40).map(|i| vec![2.0 * i as f64 / 40.0]).collect(),
            25.0,
        )
        .unwrap();
        let exact = GridSpec::new(0.02).with_iso_offset(0.0);
        let sv = sweep_trajectory(&chain, &traj, &exact).unwrap();
        let v = sv.stats[0].volume;
        assert!((v - 3.0).abs() / 3.0 < 0.03, "volume {v}");
        sv.meshes[0].check_closed().unwrap();

        // default erosion shrinks every face by the iso offset
        let sv = sweep_trajectory(&chain, &traj, &GridSpec::new(0.02)).unwrap();
        let d = sv.stats[0].iso_offset;
        let eroded = (3.0 - 2.0 * d) * (1.0 - 2.0 * d).powi(2);
        let v = sv.stats[0].volume;
        assert!(v < eroded && (v - eroded).abs() / eroded < 0.03, "volume {v} vs {eroded}");
    }

    #[test]
    fn single_pose_reproduces_body() {
        let chain = slider();
        let traj = JointTrajectory::from_configs(vec![vec![0.5]], 25.0).unwrap();
        let spec = GridSpec::new(0.02);
        let sv = compute_swept_volumes(&chain, &traj, &spec).unwrap();
        let v = sv.stats[0].volume;
        // eroded by sqrt(3)/2 spacing on every face
        let e = 0.02 * HALF_DIAGONAL;
        let expect = (1.0 - 2.0 * e).powi(3);
        assert!((v - expect).abs() < 0.01, "{v} vs {expect}");
    }

    #[test]
    fn duplicates_do_not_change_the_grid() {
        let chain = slider();
        let spec = GridSpec::new(0.05).with_iso_offset(0.05);
        let base: Vec<Vec<f64>> = (0..10).map(|i| vec![0.02 * i as f64]).collect();
        let mut dup = base.clone();
        dup.extend(base.iter().rev().cloned());
        let a = compute_link_swept_sdf(&chain, &JointTrajectory::from_configs(base, 25.0).unwrap(), 0, &spec).unwrap();
        let b = compute_link_swept_sdf(&chain, &JointTrajectory::from_configs(dup, 25.0).unwrap(), 0, &spec).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn unresampled_trajectory_is_rejected() {
        let chain = slider();
        let traj = JointTrajectory::from_configs(vec![vec![0.0], vec![1.0]], 25.0).unwrap();
        assert!(matches!(
            compute_link_swept_sdf(&chain, &traj, 0, &GridSpec::new(0.02)),
            Err(Error::NotResampled { .. })
        ));
        assert!(compute_link_swept_sdf(&chain, &JointTrajectory::default(), 0, &GridSpec::new(0.02)).is_err());
    }

    #[test]
    fn deeper_iso_gives_smaller_volume() {
        let chain = slider();
        let traj = JointTrajectory::from_configs(vec![vec![0.0]], 25.0).unwrap();
        let grid = compute_link_swept_sdf(&chain, &traj, 0, &GridSpec::new(0.05)).unwrap();
        let v0 = extract_surface(&grid, 0.0).unwrap().volume().unwrap();
        let v1 = extract_surface(&grid, -0.04).unwrap().volume().unwrap();
        assert!(v1 <= v0);
    }

    #[test]
    fn clipped_iso_surface_is_reported() {
        let chain = slider();
        let traj = JointTrajectory::from_configs(vec![vec![0.0]], 25.0).unwrap();
        let grid = compute_link_swept_sdf(&chain, &traj, 0, &GridSpec::new(0.05)).unwrap();
        assert!(matches!(
            extract_surface(&grid, 10.0),
            Err(Error::ClippedIsoSurface { .. })
        ));
    }
}
