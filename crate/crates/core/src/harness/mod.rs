//! Synthetic ground truth: scenes with known obstacles, simulated
//! exploration sessions, and a brute-force Monte Carlo oracle.

mod explore;
mod oracle;
mod scenes;

pub use explore::{check_exploration, generate_exploration, generate_exploration_from, ExplorationParams};
pub use oracle::{
    monte_carlo_volume, sample_inside, sample_surface, uniform_points, BruteForceMesh, OracleCounts,
    VolumeEstimate,
};
pub use scenes::{make_planar_chain, Scene, SceneKind, ToolKind};
