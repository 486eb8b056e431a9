//! Three-stage material estimation: losses, gradient backpropagation into the texture
//! atlases, Adam updates and stage orchestration.

mod adam;
mod backprop;
mod losses;
mod pipeline;
mod stages;

pub use adam::{Adam, AdamConfig};
pub use backprop::{backprop_to_texture, TextureGradient};
pub use losses::{loss_data, loss_propagation, loss_room_smooth, loss_semantic_smooth, MEAN_EPS};
pub use pipeline::{optimize, write_checkpoint, OptimOutput, RunManifest};
pub use stages::{
    evaluate_view, projected_step, run_stage, LossReport, OptimConfig, OptimState, Problem, Stage, StageReport, View,
    ViewEval, ViewLoss, Weights,
};
