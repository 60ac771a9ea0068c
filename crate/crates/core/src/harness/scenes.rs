use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::geometry::{
    box_mesh, cylinder_mesh, meshes_intersect, transform_mesh, triangular_prism, MeshQuery,
    RigidTransform, TriangleMesh, Vec3,
};
use crate::kinematics::{Joint, KinematicChain, Link, ToolAttachment};
use crate::{Error, Result};

/// Serial revolute chain moving in the z = 0 plane. Each link is a box of
/// `link_length × link_width × link_width` starting at its joint.
pub fn make_planar_chain(n_links: usize, link_length: f64, link_width: f64) -> KinematicChain {
    assert!(n_links >= 1, "planar chain needs at least one link");
    let body = transform_mesh(
        &box_mesh(Vec3::new(link_length, link_width, link_width)),
        &RigidTransform::from_translation(Vec3::new(link_length / 2.0, 0.0, 0.0)),
    );
    let links = (0..n_links)
        .map(|i| {
            let origin = if i == 0 {
                RigidTransform::identity()
            } else {
                RigidTransform::from_translation(Vec3::new(link_length, 0.0, 0.0))
            };
            Link::new(
                format!("link{}", i + 1),
                body.clone(),
                Joint::revolute(Vec3::z(), origin, [-2.8, 2.8]),
            )
        })
        .collect();
    KinematicChain::new(format!("planar{n_links}"), TriangleMesh::empty(), links)
        .expect("planar chain is valid")
}

/// Exploration tool shapes compared in the tool scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToolKind {
    None,
    Cube,
    Cylinder,
    Prism,
}

impl ToolKind {
    /// Tool mesh in the flange frame, or `None` for a bare flange.
    pub fn attachment(self, size: f64, flange_offset: Vec3) -> Option<ToolAttachment> {
        let mesh = match self {
            ToolKind::None => return None,
            ToolKind::Cube => box_mesh(Vec3::repeat(size)),
            ToolKind::Cylinder => cylinder_mesh(size / 2.0, size, 24),
            ToolKind::Prism => triangular_prism(size, size, size),
        };
        Some(ToolAttachment {
            mesh,
            origin: RigidTransform::from_translation(flange_offset),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Planar3,
    Wall,
    BoxCell,
    CubeTool(ToolKind),
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "planar3" => SceneKind::Planar3,
            "wall" => SceneKind::Wall,
            "box-cell" => SceneKind::BoxCell,
            "cube-tool" | "cube-tool:cube" => SceneKind::CubeTool(ToolKind::Cube),
            "cube-tool:none" => SceneKind::CubeTool(ToolKind::None),
            "cube-tool:cylinder" => SceneKind::CubeTool(ToolKind::Cylinder),
            "cube-tool:prism" => SceneKind::CubeTool(ToolKind::Prism),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown scene `{other}` (planar3, wall, box-cell, cube-tool[:none|cube|cylinder|prism])"
                )))
            }
        })
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneKind::Planar3 => write!(f, "planar3"),
            SceneKind::Wall => write!(f, "wall"),
            SceneKind::BoxCell => write!(f, "box-cell"),
            SceneKind::CubeTool(t) => write!(f, "cube-tool:{}", format!("{t:?}").to_lowercase()),
        }
    }
}

/// A robot cell with known obstacles.
#[derive(Debug, Clone)]
pub struct Scene {
    pub name: String,
    pub chain: KinematicChain,
    /// Closed obstacle meshes in world coordinates.
    pub obstacles: Vec<TriangleMesh>,
    /// Collision-free start configuration.
    pub seed_config: Vec<f64>,
    obstacle_queries: Vec<MeshQuery>,
}

fn posed_box(size: [f64; 3], xyz: [f64; 3], rpy: [f64; 3]) -> TriangleMesh {
    transform_mesh(
        &box_mesh(Vec3::from(size)),
        &RigidTransform::from_xyz_rpy(xyz, rpy),
    )
}

impl Scene {
    pub fn new(
        name: impl Into<String>,
        chain: KinematicChain,
        obstacles: Vec<TriangleMesh>,
        seed_config: Vec<f64>,
    ) -> Result<Self> {
        for (i, o) in obstacles.iter().enumerate() {
            o.check_closed()
                .map_err(|e| Error::InvalidParameter(format!("obstacle {i}: {e}")))?;
        }
        let obstacle_queries = obstacles.iter().cloned().map(MeshQuery::new).collect();
        let scene = Scene {
            name: name.into(),
            chain,
            obstacles,
            seed_config,
            obstacle_queries,
        };
        scene.chain.check_limits(&scene.seed_config)?;
        if scene.in_collision(&scene.seed_config)? {
            return Err(Error::Exploration(
                "seed configuration collides with an obstacle".into(),
            ));
        }
        Ok(scene)
    }

    pub fn build(kind: SceneKind) -> Scene {
        match kind {
            SceneKind::Planar3 => Self::planar3(),
            SceneKind::Wall => Self::wall(),
            SceneKind::BoxCell => Self::box_cell(),
            SceneKind::CubeTool(t) => Self::tool_scene(t),
        }
    }

    /// Three-link planar arm with two boxes in its plane.
    pub fn planar3() -> Scene {
        let chain = make_planar_chain(3, 0.5, 0.1);
        let obstacles = vec![
            posed_box([0.3, 0.3, 0.3], [0.9, 0.6, 0.0], [0.0; 3]),
            posed_box([0.25, 0.25, 0.25], [-0.6, -0.9, 0.0], [0.0, 0.0, 0.4]),
        ];
        Scene::new("planar3", chain, obstacles, vec![0.0; 3]).expect("planar3 scene is valid")
    }

    /// Two-link planar arm blocked by a wall along the +y direction.
    pub fn wall() -> Scene {
        let mut chain = make_planar_chain(2, 0.5, 0.1);
        chain.links[1].body = transform_mesh(
            &box_mesh(Vec3::new(0.4, 0.1, 0.1)),
            &RigidTransform::from_translation(Vec3::new(0.2, 0.0, 0.0)),
        );
        chain.links[1].mesh = chain.links[1].body.clone();
        chain.links[1].reach_radius = chain.links[1]
            .body
            .vertices
            .iter()
            .map(|v| v.coords.norm())
            .fold(0.0, f64::max);
        for l in &mut chain.links {
            l.joint.limits = [-2.6, 2.6];
        }
        chain.name = "wall-arm".into();
        let obstacles = vec![posed_box([0.06, 0.5, 0.3], [0.0, 0.55, 0.0], [0.0; 3])];
        Scene::new("wall", chain, obstacles, vec![0.0; 2]).expect("wall scene is valid")
    }

    /// Four-joint spatial arm with a cube tool in a cell of six posed boxes
    /// (cart top and body, ramp, two side boxes, a glass).
    pub fn box_cell() -> Scene {
        let chain = box_cell_chain().attach_tool(
            ToolKind::Cube
                .attachment(0.1, Vec3::new(0.0, 0.0, 0.17))
                .expect("cube tool"),
        );
        let obstacles = vec![
            posed_box([0.35, 0.45, 0.06], [0.55, 0.0, 0.25], [0.0; 3]),
            posed_box([0.3, 0.4, 0.18], [0.55, 0.0, 0.1], [0.0; 3]),
            posed_box([0.4, 0.25, 0.04], [-0.1, 0.55, 0.3], [0.0, 0.35, 0.0]),
            posed_box([0.2, 0.3, 0.4], [-0.55, -0.35, 0.2], [0.0; 3]),
            posed_box([0.25, 0.2, 0.3], [0.0, -0.6, 0.15], [0.0, 0.0, 0.3]),
            posed_box([0.08, 0.08, 0.2], [-0.45, 0.35, 0.5], [0.0; 3]),
        ];
        Scene::new("box-cell", chain, obstacles, vec![0.0; 4]).expect("box-cell scene is valid")
    }

    /// Obstacle-free planar arm carrying the given tool.
    pub fn tool_scene(tool: ToolKind) -> Scene {
        let base = make_planar_chain(3, 0.5, 0.1);
        let chain = match tool.attachment(0.2, Vec3::new(0.6, 0.0, 0.0)) {
            Some(t) => base.attach_tool(t),
            None => base,
        };
        Scene::new(format!("{}", SceneKind::CubeTool(tool)), chain, Vec::new(), vec![0.0; 3])
            .expect("tool scene is valid")
    }

    pub fn obstacle_queries(&self) -> &[MeshQuery] {
        &self.obstacle_queries
    }

    /// True when any link body at `q` touches any obstacle.
    pub fn in_collision(&self, q: &[f64]) -> Result<bool> {
        if self.obstacle_queries.is_empty() {
            return Ok(false);
        }
        let poses = self.chain.forward_kinematics(q)?;
        for (i, pose) in poses.iter().enumerate() {
            let body = self.chain.link_body(i);
            if body.is_empty() {
                continue;
            }
            let posed = MeshQuery::with_leaf_size(transform_mesh(body, pose), 4);
            let b = posed.aabb();
            for o in &self.obstacle_queries {
                if o.aabb().intersects(&b) && meshes_intersect(&posed, o) {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }
}

fn box_cell_chain() -> KinematicChain {
    let column = |w: f64, h: f64| {
        transform_mesh(
            &box_mesh(Vec3::new(w, w, h)),
            &RigidTransform::from_translation(Vec3::new(0.0, 0.0, h / 2.0)),
        )
    };
    let base = transform_mesh(
        &box_mesh(Vec3::new(0.16, 0.16, 0.1)),
        &RigidTransform::from_translation(Vec3::new(0.0, 0.0, 0.05)),
    );
    let up = |z: f64| RigidTransform::from_translation(Vec3::new(0.0, 0.0, z));
    let links = vec![
        Link::new("shoulder", column(0.14, 0.18), Joint::revolute(Vec3::z(), up(0.1), [-PI, PI])),
        Link::new("upper_arm", column(0.12, 0.35), Joint::revolute(Vec3::y(), up(0.18), [-1.8, 1.8])),
        Link::new("forearm", column(0.1, 0.3), Joint::revolute(Vec3::y(), up(0.35), [-2.2, 2.2])),
        Link::new("wrist", column(0.09, 0.12), Joint::revolute(Vec3::y(), up(0.3), [-2.0, 2.0])),
    ];
    KinematicChain::new("cell-arm", base, links).expect("box-cell chain is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    #[test]
    fn planar_three_unit_links() {
        let chain = make_planar_chain(3, 1.0, 0.1);
        let poses = chain.forward_kinematics(&[0.0; 3]).unwrap();
        let tip = poses[2].apply(&Point::new(1.0, 0.0, 0.0));
        assert!((tip - Point::new(3.0, 0.0, 0.0)).norm() < 1e-12);
        assert!(chain.reach_bound() >= 3.0);
    }

    #[test]
    fn single_bar() {
        let chain = make_planar_chain(1, 1.0, 0.1);
        assert_eq!(chain.dof(), 1);
        assert!(chain.links[0].body.is_closed());
    }

    #[test]
    fn all_scenes_build() {
        for kind in ["planar3", "wall", "box-cell", "cube-tool", "cube-tool:prism", "cube-tool:none"] {
            let k: SceneKind = kind.parse().unwrap();
            let s = Scene::build(k);
            assert!(!s.in_collision(&s.seed_config).unwrap());
            // obstacles must fit in the auto bounding cube to be representable
            let r = s.chain.reach_bound();
            for o in &s.obstacles {
                assert!(o.vertices.iter().all(|v| v.coords.amax() < r), "{kind}");
            }
        }
        assert!("nope".parse::<SceneKind>().is_err());
    }

    #[test]
    fn box_cell_has_six_obstacles_inside_reach() {
        let s = Scene::box_cell();
        assert_eq!(s.obstacles.len(), 6);
        let r = s.chain.reach_bound();
        for o in &s.obstacles {
            assert!(o.vertices.iter().all(|v| v.coords.amax() < r - 0.1));
        }
    }

    #[test]
    fn colliding_seed_rejected() {
        let chain = make_planar_chain(1, 1.0, 0.1);
        let obstacle = posed_box([0.2, 0.2, 0.2], [0.5, 0.0, 0.0], [0.0; 3]);
        assert!(Scene::new("x", chain, vec![obstacle], vec![0.0]).is_err());
    }
}
