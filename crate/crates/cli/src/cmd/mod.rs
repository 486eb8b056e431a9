pub mod analyze;
pub mod bake;
pub mod edit;
pub mod eval;
pub mod optimize;
pub mod render;
pub mod synth;
