//! Inverse rendering on textured meshes.
//!
//! Global illumination is stored as an HDR radiance texture on the scene mesh. Incident
//! light at any point is found by casting a ray and reading that texture, diffuse lighting
//! is precomputed into an irradiance texture, and albedo/roughness textures are recovered
//! from posed HDR images with a three-stage, segmentation-guided optimization.

// Index loops walk several parallel buffers at once.
#![allow(clippy::needless_range_loop)]

pub mod assets;
pub mod brdf;
pub mod eval;
pub mod geometry;
pub mod irradiance;
pub mod optimizer;
pub mod renderer;
pub mod sampling;
pub mod scenes;
pub mod segmentation;
pub mod tbl;

mod error;

pub use assets::{load_scene, AtlasConfig, MaskImage, Scene, TextureImage};
pub use error::{Error, FormatError, Result};
pub use geometry::{Camera, Projection, SceneGeometry, TriangleMesh};

