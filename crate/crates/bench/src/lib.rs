//! Shared fixtures for the benchmarks.

use normfill::synth::{fixture, fixture_camera, render, sample_density, RenderedView};
use normfill::{CameraIntrinsics, DepthImage};

/// A rendered fixture with a sparse seed map drawn from its exact depth.
pub struct Frame {
    pub camera: CameraIntrinsics,
    pub view: RenderedView,
    pub seeds: DepthImage,
}

/// Renders `name` from its own viewpoint and keeps `density` of the pixels as seeds.
pub fn frame(name: &str, density: f64) -> Frame {
    let scene = fixture(name).unwrap_or_else(|| panic!("unknown fixture {name}"));
    let camera = fixture_camera();
    let view = render(&scene, &scene.viewpoint, &camera).expect("fixture renders");
    let seeds = sample_density(&view.depth, density, 7).expect("valid density");
    Frame { camera, view, seeds }
}
