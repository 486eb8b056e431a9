//! The scene description file and the fully loaded [`Scene`].

use std::fs;
use std::path::{Path, PathBuf};

use glam::{DMat3, DVec3};
use serde::{Deserialize, Serialize};

use super::netpbm::{read_mask_pgm, read_pfm, write_atomic, write_mask_pgm, write_pfm};
use super::obj::{load_obj, write_obj};
use super::texture::{MaskImage, TextureImage};
use crate::error::{Error, Result};
use crate::geometry::{Camera, Projection, SceneGeometry};

/// Material and irradiance atlas resolutions (square).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasConfig {
    #[serde(default = "AtlasConfig::default_material")]
    pub albedo_res: usize,
    #[serde(default = "AtlasConfig::default_material")]
    pub roughness_res: usize,
    #[serde(default = "AtlasConfig::default_irt")]
    pub irt_res: usize,
}

impl AtlasConfig {
    fn default_material() -> usize {
        512
    }

    fn default_irt() -> usize {
        256
    }

    /// Resolutions used for the large captured scenes (albedo 2048², roughness 4096²,
    /// irradiance 1024²).
    pub fn full_scale() -> Self {
        AtlasConfig {
            albedo_res: 2048,
            roughness_res: 4096,
            irt_res: 1024,
        }
    }
}

impl Default for AtlasConfig {
    fn default() -> Self {
        AtlasConfig {
            albedo_res: Self::default_material(),
            roughness_res: Self::default_material(),
            irt_res: Self::default_irt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov_deg: Option<f64>,
    pub width: usize,
    pub height: usize,
    /// Camera-to-world rotation, row-major.
    pub rotation: [f64; 9],
    /// Camera center in world space, meters.
    pub translation: [f64; 3],
}

impl CameraSpec {
    pub fn to_camera(&self) -> Result<Camera> {
        let projection = match self.model.as_str() {
            "pinhole" => {
                let fov_deg = self
                    .fov_deg
                    .ok_or_else(|| Error::Schema("pinhole camera needs fov_deg".into()))?;
                if !(fov_deg > 0.0 && fov_deg < 180.0) {
                    return Err(Error::Schema(format!("fov_deg {fov_deg} out of range")));
                }
                Projection::Pinhole { fov_deg }
            }
            "equirect" => Projection::Equirect,
            other => return Err(Error::Schema(format!("unknown camera model {other:?}"))),
        };
        if self.width == 0 || self.height == 0 {
            return Err(Error::Schema("camera resolution must be positive".into()));
        }
        Ok(Camera {
            projection,
            width: self.width,
            height: self.height,
            rotation: DMat3::from_cols_array(&self.rotation).transpose(),
            position: DVec3::from_array(self.translation),
        })
    }

    pub fn from_camera(camera: &Camera) -> Self {
        let (model, fov_deg) = match camera.projection {
            Projection::Pinhole { fov_deg } => ("pinhole", Some(fov_deg)),
            Projection::Equirect => ("equirect", None),
        };
        CameraSpec {
            model: model.into(),
            fov_deg,
            width: camera.width,
            height: camera.height,
            rotation: camera.rotation.transpose().to_cols_array(),
            translation: camera.position.to_array(),
        }
    }
}

/// On-disk scene description. Relative paths resolve against the file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub mesh: PathBuf,
    pub emissive_texture: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_mask: Option<PathBuf>,
    pub cameras: Vec<CameraSpec>,
    pub images: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub albedo_texture: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roughness_texture: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub irradiance_texture: Option<PathBuf>,
    #[serde(default)]
    pub atlas: AtlasConfig,
}

/// A loaded scene. Immutable after loading; editing operations return new scenes.
#[derive(Clone, Debug)]
pub struct Scene {
    pub geometry: SceneGeometry,
    pub emissive: TextureImage,
    pub semantic: Option<MaskImage>,
    pub cameras: Vec<Camera>,
    pub images: Vec<TextureImage>,
    pub albedo: Option<TextureImage>,
    pub roughness: Option<TextureImage>,
    pub irradiance: Option<TextureImage>,
    pub atlas: AtlasConfig,
}

impl Scene {
    /// Checks the scene invariants shared by loaded and generated scenes.
    pub fn validate(&self) -> Result<()> {
        if self.cameras.len() != self.images.len() {
            return Err(Error::InvalidInput(format!(
                "{} cameras but {} images",
                self.cameras.len(),
                self.images.len()
            )));
        }
        for (i, (cam, img)) in self.cameras.iter().zip(&self.images).enumerate() {
            if !cam.rotation_is_orthonormal(1e-6) {
                return Err(Error::Invariant(format!("camera {i} rotation is not orthonormal")));
            }
            if img.width() != cam.width || img.height() != cam.height || img.channels() != 3 {
                return Err(Error::ShapeMismatch(format!(
                    "image {i} is {}x{}x{}, camera is {}x{}",
                    img.width(),
                    img.height(),
                    img.channels(),
                    cam.width,
                    cam.height
                )));
            }
            if img.first_non_finite().is_some() {
                return Err(Error::Invariant(format!("image {i} has non-finite values")));
            }
        }
        if !self.geometry.mesh.has_uvs() {
            return Err(Error::InvalidInput("scene mesh must carry texture coordinates".into()));
        }
        if self.emissive.data().iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::Invariant("emissive texture must be finite and non-negative".into()));
        }
        if let Some(a) = &self.albedo {
            if a.channels() != 3 {
                return Err(Error::ShapeMismatch("albedo texture must be RGB".into()));
            }
        }
        if let Some(r) = &self.roughness {
            if r.channels() != 1 {
                return Err(Error::ShapeMismatch("roughness texture must be single-channel".into()));
            }
        }
        Ok(())
    }

    pub fn semantic(&self) -> Result<&MaskImage> {
        self.semantic
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("scene has no semantic mask (needed by the smoothness and propagation losses)".into()))
    }

    /// Writes every asset plus `scene.json` into `dir` and returns the scene file path.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_obj(&self.geometry.mesh, dir.join("mesh.obj"))?;
        write_pfm(&self.emissive, dir.join("emissive.pfm"))?;
        let mut images = Vec::new();
        for (i, img) in self.images.iter().enumerate() {
            let name = format!("image_{i:02}.pfm");
            write_pfm(img, dir.join(&name))?;
            images.push(PathBuf::from(name));
        }
        let mut file = SceneFile {
            mesh: "mesh.obj".into(),
            emissive_texture: "emissive.pfm".into(),
            semantic_mask: None,
            cameras: self.cameras.iter().map(CameraSpec::from_camera).collect(),
            images,
            albedo_texture: None,
            roughness_texture: None,
            irradiance_texture: None,
            atlas: self.atlas,
        };
        if let Some(m) = &self.semantic {
            write_mask_pgm(m, dir.join("semantic.pgm"))?;
            file.semantic_mask = Some("semantic.pgm".into());
        }
        for (tex, name, slot) in [
            (&self.albedo, "albedo.pfm", &mut file.albedo_texture),
            (&self.roughness, "roughness.pfm", &mut file.roughness_texture),
            (&self.irradiance, "irradiance.pfm", &mut file.irradiance_texture),
        ] {
            if let Some(t) = tex {
                write_pfm(t, dir.join(name))?;
                *slot = Some(name.into());
            }
        }
        let path = dir.join("scene.json");
        save_scene_file(&file, &path)?;
        Ok(path)
    }
}

pub fn save_scene_file(file: &SceneFile, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(file).map_err(|e| Error::Schema(e.to_string()))?;
    write_atomic(path, json.as_bytes())
}

pub fn read_scene_file(path: impl AsRef<Path>) -> Result<SceneFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Loads and validates a scene file and everything it references.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let file = read_scene_file(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| base.join(p);
    let cameras = file.cameras.iter().map(CameraSpec::to_camera).collect::<Result<Vec<_>>>()?;
    if file.images.len() != cameras.len() {
        return Err(Error::InvalidInput(format!(
            "{} cameras but {} images",
            cameras.len(),
            file.images.len()
        )));
    }
    let mesh = load_obj(resolve(&file.mesh), true)?;
    let geometry = SceneGeometry::new(mesh)?;
    let emissive = read_pfm(resolve(&file.emissive_texture))?;
    let semantic = file.semantic_mask.as_deref().map(|p| read_mask_pgm(resolve(p))).transpose()?;
    let images = file.images.iter().map(|p| read_pfm(resolve(p))).collect::<Result<Vec<_>>>()?;
    let optional = |p: &Option<PathBuf>| p.as_deref().map(|p| read_pfm(resolve(p))).transpose();
    let scene = Scene {
        geometry,
        emissive,
        semantic,
        cameras,
        images,
        albedo: optional(&file.albedo_texture)?,
        roughness: optional(&file.roughness_texture)?,
        irradiance: optional(&file.irradiance_texture)?,
        atlas: file.atlas,
    };
    scene.validate()?;
    Ok(scene)
}
