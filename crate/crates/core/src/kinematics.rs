//! Fixed-base serial chains, forward kinematics, exploration-tool
//! attachment and trajectory ingestion/resampling.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Unit;
use serde::{Deserialize, Serialize};

use crate::geometry::{load_mesh, save_mesh, transform_mesh, RigidTransform, TriangleMesh, Vec3};
use crate::{Error, Result};

/// Axes within this distance of unit length are normalized with a warning.
const AXIS_NORMALIZE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone)]
pub struct Joint {
    pub kind: JointKind,
    pub axis: Unit<Vec3>,
    /// Parent frame to joint frame, applied before the joint motion.
    pub origin: RigidTransform,
    pub limits: [f64; 2],
}

impl Joint {
    pub fn revolute(axis: Vec3, origin: RigidTransform, limits: [f64; 2]) -> Self {
        Joint {
            kind: JointKind::Revolute,
            axis: Unit::new_normalize(axis),
            origin,
            limits,
        }
    }

    pub fn prismatic(axis: Vec3, origin: RigidTransform, limits: [f64; 2]) -> Self {
        Joint {
            kind: JointKind::Prismatic,
            axis: Unit::new_normalize(axis),
            origin,
            limits,
        }
    }

    /// Motion of the joint for value `q` (rotation about or translation along the axis).
    pub fn motion(&self, q: f64) -> RigidTransform {
        match self.kind {
            JointKind::Revolute => RigidTransform::from_axis_angle(&self.axis, q),
            JointKind::Prismatic => RigidTransform::from_translation(self.axis.into_inner() * q),
        }
    }

    fn max_travel(&self) -> f64 {
        match self.kind {
            JointKind::Revolute => 0.0,
            JointKind::Prismatic => self.limits[0].abs().max(self.limits[1].abs()),
        }
    }

    pub fn within_limits(&self, q: f64) -> bool {
        q >= self.limits[0] - 1e-12 && q <= self.limits[1] + 1e-12
    }
}

#[derive(Debug, Clone)]
pub struct Link {
    pub name: String,
    /// Link geometry in the link frame, without any tool.
    pub mesh: TriangleMesh,
    /// Effective geometry: `mesh`, plus the tool for the last link.
    pub body: TriangleMesh,
    pub joint: Joint,
    /// Max distance of any body vertex from the link frame origin.
    pub reach_radius: f64,
}

impl Link {
    pub fn new(name: impl Into<String>, mesh: TriangleMesh, joint: Joint) -> Self {
        let reach_radius = reach_of(&mesh);
        Link {
            name: name.into(),
            body: mesh.clone(),
            mesh,
            joint,
            reach_radius,
        }
    }
}

fn reach_of(mesh: &TriangleMesh) -> f64 {
    mesh.vertices
        .iter()
        .map(|v| v.coords.norm())
        .fold(0.0, f64::max)
}

/// Rigid body mounted on the flange and treated as part of the last link.
#[derive(Debug, Clone)]
pub struct ToolAttachment {
    pub mesh: TriangleMesh,
    /// Flange to tool.
    pub origin: RigidTransform,
}

#[derive(Debug, Clone)]
pub struct KinematicChain {
    pub name: String,
    /// Static base geometry in the world frame.
    pub base_mesh: TriangleMesh,
    pub links: Vec<Link>,
    pub tool: Option<ToolAttachment>,
}

impl KinematicChain {
    pub fn new(name: impl Into<String>, base_mesh: TriangleMesh, links: Vec<Link>) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::Schema {
                field: "links".into(),
                message: "a chain needs at least one link".into(),
            });
        }
        for l in &links {
            if l.joint.limits[0] > l.joint.limits[1] {
                return Err(Error::Schema {
                    field: format!("links.{}.joint.limits", l.name),
                    message: "lower limit exceeds upper limit".into(),
                });
            }
            if (l.joint.axis.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::NonUnitAxis {
                    joint: l.name.clone(),
                    norm: l.joint.axis.norm(),
                });
            }
            if !l.mesh.is_empty() {
                l.mesh.check_closed().map_err(|e| e.in_link(&l.name))?;
            }
        }
        Ok(KinematicChain {
            name: name.into(),
            base_mesh,
            links,
            tool: None,
        })
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn link_body(&self, i: usize) -> &TriangleMesh {
        &self.links[i].body
    }

    fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }

    /// World pose of every link frame: `T_i = T_{i-1} · origin_i · motion_i(q_i)`.
    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Vec<RigidTransform>> {
        self.check_dim(q)?;
        let mut poses = Vec::with_capacity(self.dof());
        let mut current = RigidTransform::identity();
        for (link, &qi) in self.links.iter().zip(q) {
            current = current
                .compose(&link.joint.origin)
                .compose(&link.joint.motion(qi));
            poses.push(current);
        }
        Ok(poses)
    }

    /// Body of link `i` posed in the world for configuration `q`.
    pub fn posed_link(&self, i: usize, q: &[f64]) -> Result<TriangleMesh> {
        let poses = self.forward_kinematics(q)?;
        Ok(transform_mesh(self.link_body(i), &poses[i]))
    }

    /// Returns a copy with `tool` merged into the last link's body.
    pub fn attach_tool(&self, tool: ToolAttachment) -> KinematicChain {
        let mut chain = self.clone();
        let last = chain.links.last_mut().expect("chain has links");
        let mut body = last.mesh.clone();
        body.append(&transform_mesh(&tool.mesh, &tool.origin));
        last.reach_radius = reach_of(&body);
        last.body = body;
        chain.tool = if tool.mesh.is_empty() { None } else { Some(tool) };
        chain
    }

    /// Per-joint displacement coefficients `c_j`: for a revolute joint, an
    /// upper bound on the distance of any distal material point from the
    /// joint origin over all configurations; 1 for prismatic joints.
    pub fn displacement_coefficients(&self) -> Vec<f64> {
        let n = self.dof();
        (0..n)
            .map(|j| match self.links[j].joint.kind {
                JointKind::Prismatic => 1.0,
                JointKind::Revolute => {
                    let mut offset = 0.0;
                    let mut best = self.links[j].reach_radius;
                    for k in j + 1..n {
                        let jk = &self.links[k].joint;
                        offset += jk.origin.translation.norm() + jk.max_travel();
                        best = f64::max(best, offset + self.links[k].reach_radius);
                    }
                    best
                }
            })
            .collect()
    }

    /// Upper bound on how far any point of any link moves between `qa` and `qb`.
    pub fn displacement_bound(&self, qa: &[f64], qb: &[f64]) -> Result<f64> {
        self.check_dim(qa)?;
        self.check_dim(qb)?;
        let c = self.displacement_coefficients();
        Ok(bound_with(&c, qa, qb))
    }

    /// Radius around the base frame origin containing every point the robot
    /// (and its base mesh) can ever occupy.
    pub fn reach_bound(&self) -> f64 {
        let mut offset = 0.0;
        let mut best = reach_of(&self.base_mesh);
        for l in &self.links {
            offset += l.joint.origin.translation.norm() + l.joint.max_travel();
            best = f64::max(best, offset + l.reach_radius);
        }
        best
    }

    pub fn check_limits(&self, q: &[f64]) -> Result<()> {
        self.check_dim(q)?;
        for (i, (l, &v)) in self.links.iter().zip(q).enumerate() {
            if !l.joint.within_limits(v) {
                return Err(Error::OutOfLimits {
                    joint: l.name.clone(),
                    sample: i,
                    value: v,
                    lo: l.joint.limits[0],
                    hi: l.joint.limits[1],
                });
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn bound_with(coeffs: &[f64], qa: &[f64], qb: &[f64]) -> f64 {
    coeffs
        .iter()
        .zip(qa.iter().zip(qb))
        .map(|(c, (a, b))| c * (a - b).abs())
        .sum()
}

// ---------------------------------------------------------------------------
// chain file

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OriginSpec {
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl OriginSpec {
    fn to_transform(&self) -> RigidTransform {
        RigidTransform::from_xyz_rpy(self.xyz, self.rpy)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    #[serde(rename = "type")]
    pub kind: JointKind,
    pub axis: [f64; 3],
    pub origin: OriginSpec,
    pub limits: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub name: String,
    pub mesh: String,
    pub joint: JointSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolSpec {
    pub mesh: String,
    pub origin: OriginSpec,
}

/// On-disk chain description. Mesh paths are relative to the chain file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub name: String,
    pub base_mesh: String,
    pub links: Vec<LinkSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<ToolSpec>,
}

/// Loads a chain JSON file and resolves its meshes.
pub fn load_chain(path: impl AsRef<Path>) -> Result<KinematicChain> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let spec: ChainSpec = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    chain_from_spec(&spec, dir)
}

fn resolve(dir: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

pub fn chain_from_spec(spec: &ChainSpec, dir: &Path) -> Result<KinematicChain> {
    let base_mesh = if spec.base_mesh.is_empty() {
        TriangleMesh::empty()
    } else {
        load_mesh(resolve(dir, &spec.base_mesh))?
    };
    let mut links = Vec::with_capacity(spec.links.len());
    for (i, l) in spec.links.iter().enumerate() {
        let axis = Vec3::from(l.joint.axis);
        let norm = axis.norm();
        if (norm - 1.0).abs() > AXIS_NORMALIZE_TOL || norm == 0.0 {
            return Err(Error::NonUnitAxis {
                joint: l.name.clone(),
                norm,
            });
        }
        if (norm - 1.0).abs() > 1e-9 {
            log::warn!("joint `{}`: axis norm {norm} normalized", l.name);
        }
        if l.joint.limits[0] > l.joint.limits[1] {
            return Err(Error::Schema {
                field: format!("links[{i}].joint.limits"),
                message: "lower limit exceeds upper limit".into(),
            });
        }
        let mesh = load_mesh(resolve(dir, &l.mesh))?;
        let joint = Joint {
            kind: l.joint.kind,
            axis: Unit::new_normalize(axis),
            origin: l.joint.origin.to_transform(),
            limits: l.joint.limits,
        };
        links.push(Link::new(l.name.clone(), mesh, joint));
    }
    let chain = KinematicChain::new(spec.name.clone(), base_mesh, links)?;
    match &spec.tool {
        Some(t) => {
            let mesh = load_mesh(resolve(dir, &t.mesh))?;
            mesh.check_closed().map_err(|e| e.in_link("tool"))?;
            Ok(chain.attach_tool(ToolAttachment {
                mesh,
                origin: t.origin.to_transform(),
            }))
        }
        None => Ok(chain),
    }
}

fn rpy_of(t: &RigidTransform) -> [f64; 3] {
    let (r, p, y) = nalgebra::Rotation3::from_matrix_unchecked(t.rotation).euler_angles();
    [r, p, y]
}

/// Writes `chain.json` plus one OBJ per mesh into `dir`; returns the JSON path.
pub fn save_chain(chain: &KinematicChain, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let origin = |t: &RigidTransform| OriginSpec {
        xyz: [t.translation.x, t.translation.y, t.translation.z],
        rpy: rpy_of(t),
    };
    let base_mesh = if chain.base_mesh.is_empty() {
        String::new()
    } else {
        save_mesh(&chain.base_mesh, dir.join("base.obj"))?;
        "base.obj".to_string()
    };
    let mut links = Vec::new();
    for (i, l) in chain.links.iter().enumerate() {
        let file = format!("link_{}.obj", i + 1);
        save_mesh(&l.mesh, dir.join(&file))?;
        links.push(LinkSpec {
            name: l.name.clone(),
            mesh: file,
            joint: JointSpec {
                kind: l.joint.kind,
                axis: [l.joint.axis.x, l.joint.axis.y, l.joint.axis.z],
                origin: origin(&l.joint.origin),
                limits: l.joint.limits,
            },
        });
    }
    let tool = match &chain.tool {
        Some(t) => {
            save_mesh(&t.mesh, dir.join("tool.obj"))?;
            Some(ToolSpec {
                mesh: "tool.obj".into(),
                origin: origin(&t.origin),
            })
        }
        None => None,
    };
    let spec = ChainSpec {
        name: chain.name.clone(),
        base_mesh,
        links,
        tool,
    };
    let path = dir.join("chain.json");
    let text = serde_json::to_string_pretty(&spec).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// trajectories

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub q: Vec<f64>,
}

/// Timestamped joint configurations with strictly increasing time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JointTrajectory {
    pub samples: Vec<TrajectorySample>,
}

/// What to do with samples outside the joint limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitPolicy {
    #[default]
    Reject,
    Clamp,
}

impl JointTrajectory {
    pub fn new(samples: Vec<TrajectorySample>) -> Result<Self> {
        let traj = JointTrajectory { samples };
        traj.validate()?;
        Ok(traj)
    }

    pub fn from_configs(configs: Vec<Vec<f64>>, rate_hz: f64) -> Result<Self> {
        Self::new(
            configs
                .into_iter()
                .enumerate()
                .map(|(i, q)| TrajectorySample {
                    t: i as f64 / rate_hz,
                    q,
                })
                .collect(),
        )
    }

    fn validate(&self) -> Result<()> {
        let dim = self.samples.first().map_or(0, |s| s.q.len());
        for (i, s) in self.samples.iter().enumerate() {
            if s.q.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.q.len(),
                });
            }
            if !s.t.is_finite() || s.q.iter().any(|v| !v.is_finite()) {
                return Err(Error::Trajectory(format!("non-finite value at sample {i}")));
            }
            if i > 0 && s.t <= self.samples[i - 1].t {
                return Err(Error::Trajectory(format!(
                    "timestamps not strictly increasing at sample {i}"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn configs(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.iter().map(|s| s.q.as_slice())
    }

    /// Largest consecutive displacement bound.
    pub fn max_step_bound(&self, chain: &KinematicChain) -> Result<f64> {
        let c = chain.displacement_coefficients();
        let mut best: f64 = 0.0;
        for w in self.samples.windows(2) {
            chain.check_dim(&w[0].q)?;
            best = best.max(bound_with(&c, &w[0].q, &w[1].q));
        }
        Ok(best)
    }

    /// Checks that no consecutive step exceeds `allowed`.
    pub fn check_resampled(&self, chain: &KinematicChain, allowed: f64) -> Result<()> {
        let c = chain.displacement_coefficients();
        for (i, w) in self.samples.windows(2).enumerate() {
            let b = bound_with(&c, &w[0].q, &w[1].q);
            if b > allowed * (1.0 + 1e-12) {
                return Err(Error::NotResampled {
                    index: i,
                    bound: b,
                    allowed,
                });
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let dim = self.samples.first().map_or(0, |s| s.q.len());
        let mut out = String::from("t");
        for j in 1..=dim {
            out.push_str(&format!(",q{j}"));
        }
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!("{}", s.t));
            for v in &s.q {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
        }
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Reads a `t,q1,...,qL` CSV for `chain`.
pub fn load_trajectory(
    path: impl AsRef<Path>,
    chain: &KinematicChain,
    policy: LimitPolicy,
) -> Result<JointTrajectory> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(path, &text, chain, policy)
}

pub fn parse_trajectory(
    path: &Path,
    text: &str,
    chain: &KinematicChain,
    policy: LimitPolicy,
) -> Result<JointTrajectory> {
    let perr = |line: u64, message: String| Error::Parse {
        path: path.into(),
        location: format!("line {line}"),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| perr(1, e.to_string()))?
        .clone();
    let l = chain.dof();
    if headers.len() != l + 1 || headers.get(0) != Some("t") {
        return Err(perr(
            1,
            format!(
                "expected header `t,q1..q{l}` ({} columns), found {} columns",
                l + 1,
                headers.len()
            ),
        ));
    }
    let mut samples = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let line = row as u64 + 2;
        let rec = rec.map_err(|e| perr(line, e.to_string()))?;
        if rec.len() != l + 1 {
            return Err(perr(line, format!("expected {} columns, found {}", l + 1, rec.len())));
        }
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| perr(line, format!("bad number `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        let t = vals[0];
        let mut q = vals[1..].to_vec();
        for (j, v) in q.iter_mut().enumerate() {
            let joint = &chain.links[j].joint;
            if !joint.within_limits(*v) {
                match policy {
                    LimitPolicy::Reject => {
                        return Err(Error::OutOfLimits {
                            joint: chain.links[j].name.clone(),
                            sample: row,
                            value: *v,
                            lo: joint.limits[0],
                            hi: joint.limits[1],
                        })
                    }
                    LimitPolicy::Clamp => {
                        log::warn!(
                            "sample {row}: joint `{}` value {v} clamped to limits",
                            chain.links[j].name
                        );
                        *v = v.clamp(joint.limits[0], joint.limits[1]);
                    }
                }
            }
        }
        samples.push(TrajectorySample { t, q });
    }
    JointTrajectory::new(samples)
}

/// Inserts joint-space linear interpolants so that every consecutive pair
/// satisfies `displacement_bound <= max_disp`. Original samples are kept.
pub fn resample_for_sweep(
    traj: &JointTrajectory,
    chain: &KinematicChain,
    max_disp: f64,
) -> Result<JointTrajectory> {
    if !(max_disp > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "max_disp must be positive, got {max_disp}"
        )));
    }
    let c = chain.displacement_coefficients();
    let mut out = Vec::with_capacity(traj.len());
    for (i, s) in traj.samples.iter().enumerate() {
        chain.check_dim(&s.q)?;
        if i > 0 {
            let prev = &traj.samples[i - 1];
            let b = bound_with(&c, &prev.q, &s.q);
            let n = (b / max_disp).ceil().max(1.0) as usize;
            for k in 1..n {
                let a = k as f64 / n as f64;
                out.push(TrajectorySample {
                    t: prev.t + (s.t - prev.t) * a,
                    q: prev
                        .q
                        .iter()
                        .zip(&s.q)
                        .map(|(x, y)| x + (y - x) * a)
                        .collect(),
                });
            }
        }
        out.push(s.clone());
    }
    let res = JointTrajectory { samples: out };
    res.check_resampled(chain, max_disp)?;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{box_mesh, Point};
    use crate::harness::make_planar_chain;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn planar_two_link_straight_and_quarter_turn() {
        let chain = make_planar_chain(2, 1.0, 0.1);
        let tip = |q: &[f64]| {
            let poses = chain.forward_kinematics(q).unwrap();
            poses[1].apply(&Point::new(1.0, 0.0, 0.0))
        };
        assert!((tip(&[0.0, 0.0]) - Point::new(2.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((tip(&[FRAC_PI_2, 0.0]) - Point::new(0.0, 2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn fk_rejects_wrong_dimension() {
        let chain = make_planar_chain(2, 1.0, 0.1);
        assert!(matches!(
            chain.forward_kinematics(&[0.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn single_joint_bound_is_arc_length() {
        let chain = make_planar_chain(1, 1.0, 0.1);
        let r = chain.links[0].reach_radius;
        let b = chain.displacement_bound(&[0.0], &[0.3]).unwrap();
        assert!((b - 0.3 * r).abs() < 1e-15);
        assert_eq!(chain.displacement_bound(&[0.2], &[0.2]).unwrap(), 0.0);
    }

    #[test]
    fn cube_tool_adds_eight_vertices_and_reach() {
        let chain = make_planar_chain(3, 0.5, 0.1);
        let before = chain.links[2].body.vertices.len();
        let tool = ToolAttachment {
            mesh: box_mesh(Vec3::repeat(0.2)),
            origin: RigidTransform::from_translation(Vec3::new(0.6, 0.0, 0.0)),
        };
        let with = chain.attach_tool(tool);
        assert_eq!(with.links[2].body.vertices.len(), before + 8);
        // brute-force reach recomputation
        let brute = with.links[2]
            .body
            .vertices
            .iter()
            .map(|v| (v.x * v.x + v.y * v.y + v.z * v.z).sqrt())
            .fold(0.0, f64::max);
        assert_eq!(with.links[2].reach_radius, brute);
        assert!(brute > chain.links[2].reach_radius);
    }

    #[test]
    fn empty_tool_is_identity() {
        let chain = make_planar_chain(2, 0.5, 0.1);
        let with = chain.attach_tool(ToolAttachment {
            mesh: TriangleMesh::empty(),
            origin: RigidTransform::identity(),
        });
        assert_eq!(with.links[1].body, chain.links[1].body);
        assert_eq!(with.links[1].reach_radius, chain.links[1].reach_radius);
        assert!(with.tool.is_none());
    }

    #[test]
    fn resampling_dense_is_noop() {
        let chain = make_planar_chain(2, 0.5, 0.1);
        let traj = JointTrajectory::from_configs(
            (0..10).map(|i| vec![i as f64 * 1e-3, 0.0]).collect(),
            25.0,
        )
        .unwrap();
        assert_eq!(resample_for_sweep(&traj, &chain, 0.01).unwrap(), traj);
    }

    #[test]
    fn resampling_two_samples() {
        let chain = make_planar_chain(1, 1.0, 0.1);
        let c = chain.displacement_coefficients()[0];
        let max_disp = 0.01;
        let dq = 10.0 * max_disp / c;
        let traj = JointTrajectory::from_configs(vec![vec![0.0], vec![dq]], 25.0).unwrap();
        let r = resample_for_sweep(&traj, &chain, max_disp).unwrap();
        assert!(r.len() >= 11);
        assert_eq!(r.samples[0], traj.samples[0]);
        assert_eq!(r.samples.last().unwrap(), &traj.samples[1]);
    }

    #[test]
    fn trajectory_csv_roundtrip_and_errors() {
        let chain = make_planar_chain(2, 0.5, 0.1);
        let traj = JointTrajectory::from_configs(vec![vec![0.0, 0.1], vec![0.2, -0.3]], 25.0).unwrap();
        let p = Path::new("t.csv");
        let back = parse_trajectory(p, &traj.to_csv(), &chain, LimitPolicy::Reject).unwrap();
        assert_eq!(back, traj);
        assert!(parse_trajectory(p, "t,q1\n0,0\n", &chain, LimitPolicy::Reject).is_err());
        assert!(parse_trajectory(p, "t,q1,q2\n0,0,0\n0,0,0\n", &chain, LimitPolicy::Reject).is_err());
        let far = "t,q1,q2\n0,100,0\n";
        assert!(matches!(
            parse_trajectory(p, far, &chain, LimitPolicy::Reject),
            Err(Error::OutOfLimits { .. })
        ));
        let clamped = parse_trajectory(p, far, &chain, LimitPolicy::Clamp).unwrap();
        assert_eq!(clamped.samples[0].q[0], chain.links[0].joint.limits[1]);
    }

    #[test]
    fn chain_file_roundtrip_and_axis_validation() {
        let dir = tempfile::tempdir().unwrap();
        let chain = make_planar_chain(3, 1.0, 0.1);
        let path = save_chain(&chain, dir.path()).unwrap();
        let loaded = load_chain(&path).unwrap();
        assert_eq!(loaded.dof(), 3);
        for (a, b) in loaded.links.iter().zip(&chain.links) {
            assert!((a.reach_radius - b.reach_radius).abs() < 1e-8);
        }
        let text = fs::read_to_string(&path).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        value["links"][0]["joint"]["axis"] = serde_json::json!([0.0, 0.0, 2.0]);
        let bad = serde_json::to_string(&value).unwrap();
        fs::write(&path, bad).unwrap();
        match load_chain(&path) {
            Err(Error::NonUnitAxis { norm, .. }) => assert_eq!(norm, 2.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_error_names_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"name":"x","base_mesh":"","links":[{"name":"a","mesh":"m.obj","joint":{"type":"hinge","axis":[0,0,1],"origin":{},"limits":[0,1]}}]}"#).unwrap();
        match load_chain(&path) {
            Err(Error::Schema { field, .. }) => assert!(field.contains("links[0].joint.type"), "{field}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn chain_with_tool_block_grows_reach() {
        let dir = tempfile::tempdir().unwrap();
        let chain = make_planar_chain(3, 1.0, 0.1).attach_tool(ToolAttachment {
            mesh: box_mesh(Vec3::repeat(0.2)),
            origin: RigidTransform::from_translation(Vec3::new(1.1, 0.0, 0.0)),
        });
        let loaded = load_chain(save_chain(&chain, dir.path()).unwrap()).unwrap();
        let plain = make_planar_chain(3, 1.0, 0.1);
        let brute = loaded.links[2]
            .body
            .vertices
            .iter()
            .map(|v| v.coords.norm())
            .fold(0.0, f64::max);
        assert!((loaded.links[2].reach_radius - brute).abs() < 1e-12);
        assert!(loaded.links[2].reach_radius > plain.links[2].reach_radius + 0.1);
    }
}
