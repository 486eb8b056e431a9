//! Flag parsers and flag groups shared by several subcommands.

use clap::Args;
use serde::Serialize;
use glam::DVec3;
use texir_core::AtlasConfig;

/// Parses `x,y,z`.
pub fn parse_vec3(s: &str) -> Result<DVec3, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {s:?}"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"))?;
        if !slot.is_finite() {
            return Err(format!("{p:?} is not finite"));
        }
    }
    Ok(DVec3::from_array(v))
}

/// Texture resolutions. Unset flags keep the scene's values; `--full-scale` selects the
/// large-scene configuration first.
#[derive(Args, Debug, Clone, Default, Serialize)]
pub struct AtlasArgs {
    /// Use albedo 2048², roughness 4096², irradiance 1024².
    #[arg(long)]
    pub full_scale: bool,
    /// Albedo texture resolution.
    #[arg(long)]
    pub albedo_res: Option<usize>,
    /// Roughness texture resolution.
    #[arg(long)]
    pub roughness_res: Option<usize>,
    /// Irradiance texture resolution.
    #[arg(long)]
    pub irt_res: Option<usize>,
}

impl AtlasArgs {
    pub fn apply(&self, base: AtlasConfig) -> Result<AtlasConfig, texir_core::Error> {
        let mut a = if self.full_scale { AtlasConfig::full_scale() } else { base };
        for (flag, slot) in [
            (self.albedo_res, &mut a.albedo_res),
            (self.roughness_res, &mut a.roughness_res),
            (self.irt_res, &mut a.irt_res),
        ] {
            if let Some(v) = flag {
                *slot = v;
            }
        }
        if a.albedo_res == 0 || a.roughness_res == 0 || a.irt_res == 0 {
            return Err(texir_core::Error::InvalidInput("texture resolutions must be positive".into()));
        }
        Ok(a)
    }
}
