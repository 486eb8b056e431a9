//! File formats and scene loading.

mod netpbm;
mod obj;
mod scene;
mod texture;

pub use netpbm::{
    decode_pfm, decode_pgm, encode_pfm, encode_pgm, read_mask_pgm, read_pfm, tonemap, write_atomic, write_mask_pgm,
    write_pfm, write_ppm_preview,
};
pub use obj::{load_obj, parse_obj, write_obj};
pub use scene::{load_scene, read_scene_file, save_scene_file, AtlasConfig, CameraSpec, Scene, SceneFile};
pub use texture::{texel_center, MaskImage, TextureImage};
