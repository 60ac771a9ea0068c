//! Safety queries of a robot against an obstacle model.

use serde::{Deserialize, Serialize};

use crate::carve::ObstacleModel;
use crate::geometry::{meshes_intersect, transform_mesh, MeshQuery, Point, TriangleMesh};
use crate::kinematics::{JointTrajectory, KinematicChain};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Free,
    /// Within the model's margin budget of the requested clearance.
    NearContact,
    Collision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkContact {
    pub link: String,
    pub index: usize,
    pub verdict: Verdict,
    /// Smallest signed distance of a sampled surface point to the obstacle
    /// mesh (negative inside).
    pub min_distance: f64,
    pub surfaces_intersect: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub verdict: Verdict,
    pub clearance: f64,
    pub margin_budget: f64,
    /// Deepest sampled penetration into the obstacle mesh (0 if none).
    pub max_penetration: f64,
    /// Links that are not free.
    pub links: Vec<LinkContact>,
}

impl CollisionReport {
    pub fn in_collision(&self) -> bool {
        self.verdict == Verdict::Collision
    }
}

/// Obstacle mesh prepared for repeated queries.
#[derive(Debug, Clone)]
pub struct ObstacleChecker {
    query: MeshQuery,
    margin_budget: f64,
    sample_spacing: f64,
}

impl ObstacleChecker {
    pub fn new(model: &ObstacleModel) -> Result<Self> {
        Self::from_mesh(model.mesh.clone(), model.margin_budget(), model.meta.spacing)
    }

    /// `sample_spacing` sets the density of robot surface samples.
    pub fn from_mesh(mesh: TriangleMesh, margin_budget: f64, sample_spacing: f64) -> Result<Self> {
        if !mesh.is_empty() {
            mesh.check_closed()?;
        }
        if !(sample_spacing > 0.0) || margin_budget < 0.0 {
            return Err(Error::InvalidParameter(
                "sample spacing must be positive and margin budget non-negative".into(),
            ));
        }
        Ok(ObstacleChecker {
            query: MeshQuery::new(mesh),
            margin_budget,
            sample_spacing,
        })
    }

    pub fn margin_budget(&self) -> f64 {
        self.margin_budget
    }

    pub fn query(&self) -> &MeshQuery {
        &self.query
    }
}

/// Vertices plus a barycentric lattice on every face with about `h` spacing.
fn surface_samples(mesh: &TriangleMesh, h: f64) -> Vec<Point> {
    let mut out = mesh.vertices.clone();
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.triangle(f);
        let longest = (b - a).norm().max((c - b).norm()).max((a - c).norm());
        let k = ((longest / h).ceil() as usize).clamp(1, 256);
        for i in 0..=k {
            for j in 0..=k - i {
                let (s, t) = (i as f64 / k as f64, j as f64 / k as f64);
                out.push(a + (b - a) * s + (c - a) * t);
            }
        }
    }
    out
}

fn classify(min_distance: f64, intersect: bool, clearance: f64, slack: f64) -> Verdict {
    if min_distance < clearance - slack {
        Verdict::Collision
    } else if min_distance < clearance || intersect {
        Verdict::NearContact
    } else {
        Verdict::Free
    }
}

/// Checks configuration `q` against the obstacle mesh.
///
/// Each posed link is tested for surface intersection with the obstacle
/// mesh and sampled (vertices and face lattice) for signed distance. A link
/// is in collision when a sample lies more than the margin budget below
/// `clearance`; shallower contacts are near contacts.
pub fn config_in_collision(
    chain: &KinematicChain,
    q: &[f64],
    checker: &ObstacleChecker,
    clearance: f64,
) -> Result<CollisionReport> {
    if !(clearance >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "clearance must be non-negative, got {clearance}"
        )));
    }
    let poses = chain.forward_kinematics(q)?;
    let obstacle = &checker.query;
    let mut links = Vec::new();
    let mut worst = Verdict::Free;
    let mut max_penetration: f64 = 0.0;
    if obstacle.mesh().is_empty() {
        return Ok(CollisionReport {
            verdict: Verdict::Free,
            clearance,
            margin_budget: checker.margin_budget,
            max_penetration: 0.0,
            links,
        });
    }
    for (i, pose) in poses.iter().enumerate() {
        let body = chain.link_body(i);
        if body.is_empty() {
            continue;
        }
        let posed = transform_mesh(body, pose);
        let reach = obstacle.aabb().expanded(clearance);
        if !reach.intersects(&posed.aabb()) {
            continue;
        }
        let h = checker.sample_spacing;
        let min_distance = surface_samples(&posed, h)
            .iter()
            .map(|p| obstacle.signed_distance_unchecked(p))
            .fold(f64::INFINITY, f64::min);
        let intersect = meshes_intersect(&MeshQuery::with_leaf_size(posed, 4), obstacle);
        max_penetration = max_penetration.max(-min_distance);
        let verdict = classify(min_distance, intersect, clearance, checker.margin_budget);
        if verdict != Verdict::Free {
            links.push(LinkContact {
                link: chain.links[i].name.clone(),
                index: i,
                verdict,
                min_distance,
                surfaces_intersect: intersect,
            });
        }
        worst = worst.max(verdict);
    }
    Ok(CollisionReport {
        verdict: worst,
        clearance,
        margin_budget: checker.margin_budget,
        max_penetration,
        links,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    /// True when no sample is in collision.
    pub free: bool,
    pub samples: usize,
    pub clearance: f64,
    pub margin_budget: f64,
    pub first_collision: Option<usize>,
    pub collisions: usize,
    pub near_contacts: usize,
    pub max_penetration: f64,
    pub verdicts: Vec<Verdict>,
    /// Reports of the samples that are not free.
    pub contacts: Vec<(usize, CollisionReport)>,
}

/// Checks every trajectory sample. With positive clearance the samples
/// must be dense enough that no point moves more than `clearance` between
/// consecutive samples.
pub fn trajectory_collision_free(
    chain: &KinematicChain,
    traj: &JointTrajectory,
    checker: &ObstacleChecker,
    clearance: f64,
) -> Result<TrajectoryReport> {
    if clearance > 0.0 {
        traj.check_resampled(chain, clearance)?;
    }
    let reports = par::map_range(traj.len(), |i| {
        config_in_collision(chain, &traj.samples[i].q, checker, clearance)
    });
    let mut out = TrajectoryReport {
        free: true,
        samples: traj.len(),
        clearance,
        margin_budget: checker.margin_budget,
        first_collision: None,
        collisions: 0,
        near_contacts: 0,
        max_penetration: 0.0,
        verdicts: Vec::with_capacity(traj.len()),
        contacts: Vec::new(),
    };
    for (i, r) in reports.into_iter().enumerate() {
        let r = r?;
        out.max_penetration = out.max_penetration.max(r.max_penetration);
        match r.verdict {
            Verdict::Free => {}
            Verdict::NearContact => out.near_contacts += 1,
            Verdict::Collision => {
                out.collisions += 1;
                out.free = false;
                out.first_collision.get_or_insert(i);
            }
        }
        out.verdicts.push(r.verdict);
        if r.verdict != Verdict::Free {
            out.contacts.push((i, r));
        }
    }
    Ok(out)
}
