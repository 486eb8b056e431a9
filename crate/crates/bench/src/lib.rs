//! Fixtures shared by the benchmarks.

use texir_core::scenes::{three_room_scene, SynthConfig, SyntheticScene};

/// The bundled three-room scene at a size that builds in well under a second.
pub fn small_bundled_scene() -> SyntheticScene {
    let config = SynthConfig {
        image_width: 64,
        image_height: 48,
        material_res: 64,
        emissive_res: 64,
        irt_res: 32,
        render_samples: 16,
        bake_samples: 64,
        bounces: 1,
        bounce_samples: 16,
        seed: 1,
    };
    three_room_scene(&config).expect("bundled scene")
}
