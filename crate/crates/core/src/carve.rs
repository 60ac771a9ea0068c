//! Obstacle representation: the bounding volume minus every swept volume,
//! realized on one shared signed-distance grid.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::geometry::{
    box_mesh, icosphere, load_mesh, save_mesh, transform_mesh, MeshQuery, RigidTransform,
    TriangleMesh, Vec3,
};
use crate::grid::{sample_mesh_sdf, GridFrame, GridSpec, SdfGrid, HALF_DIAGONAL};
use crate::kinematics::KinematicChain;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundingKind {
    Cube,
    Sphere,
}

impl FromStr for BoundingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cube" | "auto-cube" => Ok(BoundingKind::Cube),
            "sphere" | "auto-sphere" => Ok(BoundingKind::Sphere),
            other => Err(Error::InvalidParameter(format!(
                "unknown bounding volume `{other}` (auto-cube, auto-sphere)"
            ))),
        }
    }
}

/// Workspace bounding volume, centered at the robot base frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundingVolume {
    pub kind: BoundingKind,
    pub center: [f64; 3],
    /// Cube half-extent or radius of the inscribed ball of the sphere mesh.
    pub half_extent: f64,
    pub scale: f64,
    #[serde(skip, default = "TriangleMesh::empty")]
    pub mesh: TriangleMesh,
}

impl BoundingVolume {
    pub fn new(kind: BoundingKind, center: [f64; 3], half_extent: f64, scale: f64) -> Result<Self> {
        if !(half_extent > 0.0 && half_extent.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bounding volume half extent must be positive, got {half_extent}"
            )));
        }
        let local = match kind {
            BoundingKind::Cube => box_mesh(Vec3::repeat(2.0 * half_extent)),
            BoundingKind::Sphere => {
                // scale the polyhedron so its faces clear the requested ball
                let unit = icosphere(1.0, 3);
                let inner = (0..unit.faces.len())
                    .map(|f| {
                        let n = unit.face_normal_raw(f).normalize();
                        n.dot(&unit.vertices[unit.faces[f][0] as usize].coords)
                    })
                    .fold(f64::INFINITY, f64::min);
                icosphere(half_extent / inner, 3)
            }
        };
        let mesh = transform_mesh(&local, &RigidTransform::from_translation(Vec3::from(center)));
        Ok(BoundingVolume {
            kind,
            center,
            half_extent,
            scale,
            mesh,
        })
    }

    fn rebuild(&mut self) -> Result<()> {
        *self = BoundingVolume::new(self.kind, self.center, self.half_extent, self.scale)?;
        Ok(())
    }
}

/// Bounding volume around the base frame that contains every point the
/// robot can reach, enlarged by `scale`.
pub fn make_bounding_volume(chain: &KinematicChain, kind: BoundingKind, scale: f64) -> Result<BoundingVolume> {
    if !(scale >= 1.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bounding volume scale must be at least 1, got {scale}"
        )));
    }
    BoundingVolume::new(kind, [0.0; 3], scale * chain.reach_bound(), scale)
}

/// Extra amount by which subtracted fields are shrunk so that grid
/// interpolation can only enlarge the result.
pub fn carve_shift(spec: &GridSpec) -> f64 {
    spec.spacing * HALF_DIAGONAL * (1.0 + 1e-9) + spec.iso_offset.unwrap_or(0.0)
}

/// `a \ b` on a grid covering `a`. Over-approximates the exact difference.
pub fn boolean_difference(a: &TriangleMesh, b: &TriangleMesh, spec: &GridSpec) -> Result<TriangleMesh> {
    spec.validate()?;
    a.check_closed()?;
    b.check_closed()?;
    let shift = carve_shift(spec);
    let band = shift + 2.0 * spec.spacing;
    let frame = GridFrame::covering(&a.aabb(), spec.spacing, spec.padding.max(band));
    let qa = MeshQuery::new(a.clone());
    let mut values = sample_mesh_sdf(&qa, &frame, band);
    if !b.is_empty() {
        let sb = sample_mesh_sdf(&MeshQuery::new(b.clone()), &frame, band);
        combine_subtraction(&mut values, &sb, shift);
    }
    SdfGrid {
        frame,
        values,
        margin_budget: shift + spec.spacing * HALF_DIAGONAL,
    }
    .extract(0.0)
}

fn combine_subtraction(values: &mut [f64], subtracted: &[f64], shift: f64) {
    for (v, s) in values.iter_mut().zip(subtracted) {
        *v = v.max(-s - shift);
    }
}

/// A swept-volume mesh with its origin.
#[derive(Debug, Clone)]
pub struct SweptSource {
    pub id: String,
    pub session: String,
    pub mesh: TriangleMesh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub id: String,
    pub session: String,
}

/// Metadata written next to the obstacle mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstacleMeta {
    /// Mesh file, relative to the metadata file.
    pub mesh_file: String,
    pub bounding_volume: BoundingVolume,
    /// Deepest a robot at an explored configuration can reach into the
    /// obstacle mesh.
    pub margin_budget: f64,
    /// Part of the budget inherited from sweeping and decimation.
    pub input_margin: f64,
    pub corner_factor: f64,
    pub spacing: f64,
    pub shift: f64,
    pub grid_dims: [usize; 3],
    pub vertices: usize,
    pub faces: usize,
    pub volume: f64,
    pub bounding_volume_volume: f64,
    pub wall_time_s: f64,
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Clone)]
pub struct ObstacleModel {
    pub mesh: TriangleMesh,
    pub meta: ObstacleMeta,
}

impl ObstacleModel {
    pub fn bounding_volume(&self) -> &TriangleMesh {
        &self.meta.bounding_volume.mesh
    }

    pub fn margin_budget(&self) -> f64 {
        self.meta.margin_budget
    }

    /// Writes the mesh to `mesh_path` and the metadata JSON to `meta_path`.
    pub fn save(&self, mesh_path: &Path, meta_path: &Path) -> Result<()> {
        save_mesh(&self.mesh, mesh_path)?;
        let mut meta = self.meta.clone();
        meta.mesh_file = relative_to(mesh_path, meta_path);
        let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        std::fs::write(meta_path, text).map_err(|e| Error::io(meta_path, e))
    }

    /// Loads the metadata JSON and the mesh it names.
    pub fn load(meta_path: &Path) -> Result<ObstacleModel> {
        let text = std::fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
        let mut meta: ObstacleMeta = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: meta_path.to_path_buf(),
            source: e,
        })?;
        meta.bounding_volume.rebuild()?;
        let dir = meta_path.parent().unwrap_or(Path::new("."));
        let mesh = load_mesh(dir.join(&meta.mesh_file))?;
        mesh.check_closed()?;
        Ok(ObstacleModel { mesh, meta })
    }
}

fn relative_to(target: &Path, base_file: &Path) -> String {
    let base = base_file.parent().unwrap_or(Path::new(""));
    let rel: PathBuf = match (target.canonicalize(), base.canonicalize()) {
        (Ok(t), Ok(b)) => t.strip_prefix(&b).map(Path::to_path_buf).unwrap_or(t),
        _ => target.to_path_buf(),
    };
    rel.to_string_lossy().into_owned()
}

/// Signed-distance grid of the obstacle region before extraction.
pub fn obstacle_field(bv: &BoundingVolume, svs: &[SweptSource], spec: &GridSpec) -> Result<SdfGrid> {
    spec.validate()?;
    for s in svs {
        s.mesh
            .check_closed()
            .map_err(|e| Error::InvalidMesh(format!("swept volume {}: {e}", s.id)))?;
    }
    let shift = carve_shift(spec);
    let band = shift + 2.0 * spec.spacing;
    let frame = GridFrame::covering(&bv.mesh.aabb(), spec.spacing, spec.padding.max(band));
    let mut values = sample_mesh_sdf(&MeshQuery::new(bv.mesh.clone()), &frame, band);
    if !svs.is_empty() {
        let mut union = vec![band; frame.len()];
        for s in svs.iter().filter(|s| !s.mesh.is_empty()) {
            let sd = sample_mesh_sdf(&MeshQuery::new(s.mesh.clone()), &frame, band);
            for (u, d) in union.iter_mut().zip(&sd) {
                *u = u.min(*d);
            }
        }
        combine_subtraction(&mut values, &union, shift);
    }
    Ok(SdfGrid {
        frame,
        values,
        margin_budget: shift + spec.spacing * HALF_DIAGONAL,
    })
}

/// Bounding volume minus the union of all swept volumes.
///
/// `input_margin` is the conservativeness slack already spent upstream
/// (sweep erosion plus decimation); it is added to the model's budget.
/// `corner_factor` scales this step's own slack for the sharpest robot
/// corner (see [`TriangleMesh::corner_factor`]); 1 for smooth links.
pub fn obstacle_representation(
    bv: &BoundingVolume,
    svs: &[SweptSource],
    spec: &GridSpec,
    input_margin: f64,
    corner_factor: f64,
) -> Result<ObstacleModel> {
    if !(corner_factor >= 1.0) {
        return Err(Error::InvalidParameter(format!("corner factor {corner_factor} must be at least 1")));
    }
    let start = Instant::now();
    let field = obstacle_field(bv, svs, spec)?;
    let mesh = field.extract(0.0)?;
    let volume = if mesh.is_empty() { 0.0 } else { mesh.volume()? };
    let meta = ObstacleMeta {
        mesh_file: String::new(),
        bounding_volume: bv.clone(),
        margin_budget: input_margin + corner_factor * field.margin_budget,
        input_margin,
        corner_factor,
        spacing: spec.spacing,
        shift: carve_shift(spec),
        grid_dims: field.frame.dims,
        vertices: mesh.vertices.len(),
        faces: mesh.faces.len(),
        volume,
        bounding_volume_volume: bv.mesh.volume()?,
        wall_time_s: start.elapsed().as_secs_f64(),
        provenance: svs
            .iter()
            .map(|s| Provenance {
                id: s.id.clone(),
                session: s.session.clone(),
            })
            .collect(),
    };
    Ok(ObstacleModel { mesh, meta })
}
