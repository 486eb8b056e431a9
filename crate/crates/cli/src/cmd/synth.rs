use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use texir_core::scenes::{three_room_scene, SynthConfig};
use texir_core::Result;

use crate::output::{prepare_out, Manifest};
use crate::Ctx;

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    /// Output directory: inputs in OUT, the same scene with true materials in OUT/gt.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 96)]
    pub height: usize,
    /// Albedo and roughness texture resolution.
    #[arg(long, default_value_t = 64)]
    pub material_res: usize,
    #[arg(long, default_value_t = 128)]
    pub emissive_res: usize,
    #[arg(long, default_value_t = 64)]
    pub irt_res: usize,
    /// Samples per pixel of the input renders.
    #[arg(long, default_value_t = 512)]
    pub render_samples: usize,
    /// Samples per texel of the irradiance bake.
    #[arg(long, default_value_t = 2048)]
    pub bake_samples: usize,
    /// Diffuse interreflection bounces folded into the lighting texture.
    #[arg(long, default_value_t = 3)]
    pub bounces: usize,
    #[arg(long, default_value_t = 256)]
    pub bounce_samples: usize,
}

pub fn run(ctx: &Ctx, args: SynthArgs) -> Result<()> {
    prepare_out(&args.out, &[])?;
    let config = SynthConfig {
        image_width: args.width,
        image_height: args.height,
        material_res: args.material_res,
        emissive_res: args.emissive_res,
        irt_res: args.irt_res,
        render_samples: args.render_samples,
        bake_samples: args.bake_samples,
        bounces: args.bounces,
        bounce_samples: args.bounce_samples,
        seed: ctx.seed,
    };
    let mut manifest = Manifest::new("synth", ctx, None, config);
    let synth = manifest.time("synthesize", || three_room_scene(&config))?;
    let inputs = synth.scene.save(&args.out)?;
    manifest.output(inputs);
    let mut gt = synth.scene.clone();
    gt.albedo = Some(synth.albedo);
    gt.roughness = Some(synth.roughness);
    manifest.output(gt.save(args.out.join("gt"))?);
    manifest.write(&args.out)
}
