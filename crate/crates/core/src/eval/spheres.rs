//! Virtual probe spheres relit by interchangeable lighting representations.
//!
//! Lighting is treated as distant: every representation is queried by direction only, as
//! seen from the probe point. All representations share the same per-pixel sample
//! directions, so comparing a representation with itself gives exactly zero error.

use glam::DVec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mae, sg_fit, sh_project, ssim, SgConfig, SgLighting, ShLighting};
use crate::assets::TextureImage;
use crate::brdf::{eval_specular, reflect, sample_cosine, sample_ggx, R_MIN};
use crate::error::Result;
use crate::sampling::{mix_seed, stratified_2d, stream_rng, Frame};
use crate::tbl::TblLight;

/// Incident radiance by direction.
pub trait Environment: Sync {
    fn radiance(&self, dir: DVec3) -> DVec3;
}

impl Environment for ShLighting {
    fn radiance(&self, dir: DVec3) -> DVec3 {
        self.eval(dir)
    }
}

impl Environment for SgLighting {
    fn radiance(&self, dir: DVec3) -> DVec3 {
        self.eval(dir)
    }
}

/// Uniform radiance from every direction.
#[derive(Clone, Copy, Debug)]
pub struct ConstantEnvironment(pub DVec3);

impl Environment for ConstantEnvironment {
    fn radiance(&self, _dir: DVec3) -> DVec3 {
        self.0
    }
}

/// TBL radiance seen from a fixed probe point.
#[derive(Clone, Copy)]
pub struct TblProbe<'a> {
    pub tbl: TblLight<'a>,
    pub position: DVec3,
}

impl Environment for TblProbe<'_> {
    fn radiance(&self, dir: DVec3) -> DVec3 {
        self.tbl.query_radiance(self.position, dir)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereMaterial {
    Diffuse,
    MatteSilver,
    MirrorSilver,
}

impl SphereMaterial {
    pub const ALL: [SphereMaterial; 3] = [SphereMaterial::Diffuse, SphereMaterial::MatteSilver, SphereMaterial::MirrorSilver];

    pub fn albedo(self) -> f64 {
        match self {
            SphereMaterial::Diffuse => 0.8,
            SphereMaterial::MatteSilver | SphereMaterial::MirrorSilver => 0.95,
        }
    }

    pub fn roughness(self) -> f64 {
        match self {
            SphereMaterial::Diffuse => 1.0,
            SphereMaterial::MatteSilver => 0.4,
            SphereMaterial::MirrorSilver => R_MIN,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SphereMaterial::Diffuse => "diffuse",
            SphereMaterial::MatteSilver => "matte_silver",
            SphereMaterial::MirrorSilver => "mirror_silver",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Tbl,
    Sh,
    Sg,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Tbl => "tbl",
            Representation::Sh => "sh",
            Representation::Sg => "sg",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SphereConfig {
    /// Image side in pixels; the sphere is inscribed in the image.
    pub resolution: usize,
    /// Samples per pixel for each of the diffuse and specular estimates.
    pub samples: usize,
    pub seed: u64,
}

impl Default for SphereConfig {
    fn default() -> Self {
        SphereConfig {
            resolution: 64,
            samples: 64,
            seed: 0,
        }
    }
}

/// Orthographic image of a unit sphere seen along `-view` (`view` points from the sphere to
/// the viewer). Background pixels are black.
pub fn render_sphere(env: &dyn Environment, material: SphereMaterial, view: DVec3, config: &SphereConfig) -> TextureImage {
    let res = config.resolution.max(1);
    let v = view.normalize_or(DVec3::Z);
    let frame = Frame::from_normal(v);
    let albedo = material.albedo();
    let r = material.roughness();
    let pixels: Vec<DVec3> = (0..res * res)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % res, i / res);
            let px = (x as f64 + 0.5) / res as f64 * 2.0 - 1.0;
            let py = (y as f64 + 0.5) / res as f64 * 2.0 - 1.0;
            let rho2 = px * px + py * py;
            if rho2 >= 1.0 {
                return DVec3::ZERO;
            }
            let n = frame.to_world(DVec3::new(px, py, (1.0 - rho2).sqrt()));
            let nf = Frame::from_normal(n);
            let mut rng = stream_rng(mix_seed(&[config.seed, i as u64]), 0);
            let n_samples = config.samples.max(1);

            let mut diffuse = DVec3::ZERO;
            for u in stratified_2d(n_samples, &mut rng) {
                let (l, _) = sample_cosine(u.x, u.y);
                diffuse += env.radiance(nf.to_world(l));
            }
            // A/π · ∫ L cosθ dω with cosine sampling is A · mean(L).
            let mut color = diffuse * (albedo / n_samples as f64);

            let mut spec = DVec3::ZERO;
            for u in stratified_2d(n_samples, &mut rng) {
                let (h_local, pdf_h) = sample_ggx(u.x, u.y, r);
                let h = nf.to_world(h_local);
                let l = reflect(v, h);
                let (n_dot_l, v_dot_h) = (n.dot(l), v.dot(h));
                if n_dot_l <= 0.0 || v_dot_h <= 0.0 || pdf_h <= 0.0 {
                    continue;
                }
                let pdf_l = pdf_h / (4.0 * v_dot_h);
                let f = eval_specular(n, v, l, r);
                if f > 0.0 {
                    spec += env.radiance(l) * (f * n_dot_l / pdf_l);
                }
            }
            color += spec / n_samples as f64;
            color
        })
        .collect();
    let mut img = TextureImage::new(res, res, 3);
    for (i, c) in pixels.into_iter().enumerate() {
        img.set_rgb(i, c);
    }
    img
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub sh_order: usize,
    pub sh_samples: usize,
    pub sg: SgConfig,
    pub sphere: SphereConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            sh_order: 5,
            sh_samples: 1 << 16,
            sg: SgConfig::default(),
            sphere: SphereConfig::default(),
        }
    }
}

/// Error of one representation on one sphere against the TBL reference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereScore {
    pub material: SphereMaterial,
    pub representation: Representation,
    pub mae: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub probe: [f64; 3],
    pub view: [f64; 3],
    pub config: HarnessConfig,
    pub scores: Vec<SphereScore>,
}

impl HarnessReport {
    pub fn score(&self, material: SphereMaterial, representation: Representation) -> Option<&SphereScore> {
        self.scores
            .iter()
            .find(|s| s.material == material && s.representation == representation)
    }
}

pub struct HarnessOutput {
    pub report: HarnessReport,
    pub sh: ShLighting,
    pub sg: SgLighting,
    pub images: Vec<(SphereMaterial, Representation, TextureImage)>,
}

/// Fits SH and SG lighting at `probe`, renders the three spheres under TBL, SH and SG and
/// scores each against the TBL rendering.
pub fn sphere_harness(tbl: &TblLight, probe: DVec3, view: DVec3, config: &HarnessConfig) -> Result<HarnessOutput> {
    let sh = sh_project(tbl, probe, config.sh_order, config.sh_samples, config.sphere.seed);
    let sg = sg_fit(tbl, probe, &config.sg)?;
    let reference = TblProbe {
        tbl: *tbl,
        position: probe,
    };
    let envs: [(Representation, &dyn Environment); 3] = [
        (Representation::Tbl, &reference),
        (Representation::Sh, &sh),
        (Representation::Sg, &sg),
    ];
    let mut scores = Vec::new();
    let mut images = Vec::new();
    for material in SphereMaterial::ALL {
        let truth = render_sphere(&reference, material, view, &config.sphere);
        for (rep, env) in envs {
            let img = if rep == Representation::Tbl {
                truth.clone()
            } else {
                render_sphere(env, material, view, &config.sphere)
            };
            scores.push(SphereScore {
                material,
                representation: rep,
                mae: mae(&img, &truth)?,
                ssim: ssim(&img, &truth)?,
            });
            images.push((material, rep, img));
        }
    }
    Ok(HarnessOutput {
        report: HarnessReport {
            probe: probe.to_array(),
            view: view.to_array(),
            config: *config,
            scores,
        },
        sh,
        sg,
        images,
    })
}
