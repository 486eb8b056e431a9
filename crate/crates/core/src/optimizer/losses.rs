//! Image-space loss terms. Every function returns the loss and its (sub)gradient with respect
//! to its first argument, laid out like that argument.

use crate::assets::TextureImage;
use crate::error::{Error, Result};
use crate::segmentation::quantile_of;

/// Floor of the class-mean denominator. Nonempty classes divide by their exact count, so a
/// constant class has exactly zero loss and zero gradient.
pub const MEAN_EPS: f64 = 1e-8;

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Sign with a dead zone of a few ulps around `reference`, so values that equal the class
/// mean up to rounding take the zero subgradient.
fn sign_near(d: f64, reference: f64) -> f64 {
    if d.abs() <= 1e-12 * reference.abs().max(1.0) {
        0.0
    } else {
        sign(d)
    }
}

fn distinct_labels(labels: &[u32]) -> Vec<u32> {
    let mut ids: Vec<u32> = labels.iter().copied().filter(|&c| c != 0).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// `Σ_c Σ_{p∈c} |F_p − mean_c|` summed over channels, with the mean detached.
///
/// `feature` holds `channels` values per pixel; label 0 marks pixels outside every class.
/// The gradient is `sign(F_p − mean_c)` on class pixels and 0 elsewhere.
pub fn loss_semantic_smooth(feature: &[f64], channels: usize, labels: &[u32]) -> (f64, Vec<f64>) {
    debug_assert_eq!(feature.len(), labels.len() * channels);
    let mut grad = vec![0.0; feature.len()];
    let mut loss = 0.0;
    for c in distinct_labels(labels) {
        // Mean shifted by the first member, so a constant class reproduces its value exactly.
        let first = labels.iter().position(|l| *l == c).unwrap_or(0);
        let shift = &feature[first * channels..(first + 1) * channels];
        let mut sum = vec![0.0; channels];
        let mut count = 0.0;
        for (p, _) in labels.iter().enumerate().filter(|(_, l)| **l == c) {
            for k in 0..channels {
                sum[k] += feature[p * channels + k] - shift[k];
            }
            count += 1.0;
        }
        let mean: Vec<f64> = (0..channels).map(|k| shift[k] + sum[k] / f64::max(count, MEAN_EPS)).collect();
        for (p, _) in labels.iter().enumerate().filter(|(_, l)| **l == c) {
            for k in 0..channels {
                let d = feature[p * channels + k] - mean[k];
                loss += d.abs();
                grad[p * channels + k] = sign_near(d, mean[k]);
            }
        }
    }
    (loss, grad)
}

/// Room smoothness on a scalar roughness image: the semantic term with rooms as classes.
pub fn loss_room_smooth(roughness: &[f64], rooms: &[u32]) -> (f64, Vec<f64>) {
    loss_semantic_smooth(roughness, 1, rooms)
}

/// For every class with highlight pixels, pulls its other pixels toward the `q`-quantile of
/// the roughness on the highlights. Classes without highlights contribute nothing.
pub fn loss_propagation(roughness: &[f64], classes: &[u32], vhl: &[bool], q: f64) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; roughness.len()];
    let mut loss = 0.0;
    for c in distinct_labels(classes) {
        let mut on: Vec<f64> = (0..roughness.len())
            .filter(|&p| classes[p] == c && vhl[p])
            .map(|p| roughness[p])
            .collect();
        let Ok(target) = quantile_of(&mut on, q) else {
            continue;
        };
        for p in 0..roughness.len() {
            if classes[p] == c && !vhl[p] {
                let d = roughness[p] - target;
                loss += d.abs();
                grad[p] = sign_near(d, target);
            }
        }
    }
    (loss, grad)
}

/// Mean absolute difference over the channels of included pixels, and its gradient with
/// respect to `render`. Pixels with `include[p] == false` are ignored.
pub fn loss_data(render: &TextureImage, input: &TextureImage, include: &[bool]) -> Result<(f64, Vec<f64>)> {
    if !render.same_shape(input) || include.len() != render.pixel_count() {
        return Err(Error::ShapeMismatch(format!(
            "render {}x{}x{}, input {}x{}x{}, mask {}",
            render.width(),
            render.height(),
            render.channels(),
            input.width(),
            input.height(),
            input.channels(),
            include.len()
        )));
    }
    let ch = render.channels();
    let n = include.iter().filter(|m| **m).count() * ch;
    let mut grad = vec![0.0; render.data().len()];
    if n == 0 {
        return Ok((0.0, grad));
    }
    let mut loss = 0.0;
    for (p, _) in include.iter().enumerate().filter(|(_, m)| **m) {
        for k in p * ch..(p + 1) * ch {
            let d = render.data()[k] - input.data()[k];
            loss += d.abs();
            grad[k] = sign(d) / n as f64;
        }
    }
    Ok((loss / n as f64, grad))
}
