//! Analytic piecewise-planar scenes that stand in for a learned prior and a
//! depth sensor: exact depth, normals and color by ray casting, plus a
//! seeded noise model (ChaCha8, one stream per noise source).

mod fixtures;
mod noise;
mod render;
mod scene;

pub use fixtures::{box_room, desk_on_floor, fixture, fixture_camera, two_wall_crease, FIXTURE_NAMES};
pub use noise::{corrupt, corrupt_depth, corrupt_normals, sample_density, sample_sparse, NoiseSpec};
pub use render::{render, RenderedView};
pub use scene::{Extent, PlanarScene, Plane};
