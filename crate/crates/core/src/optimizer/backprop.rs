//! Scatter of image-space gradients into texture atlases through the bilinear lookup.

use glam::DVec2;

use crate::assets::TextureImage;

/// Texture-shaped gradient accumulator that also records which texels were touched.
#[derive(Clone, Debug)]
pub struct TextureGradient {
    pub grad: TextureImage,
    pub touched: Vec<bool>,
}

impl TextureGradient {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        TextureGradient {
            grad: TextureImage::new(width, height, channels),
            touched: vec![false; width * height],
        }
    }

    pub fn like(texture: &TextureImage) -> Self {
        Self::new(texture.width(), texture.height(), texture.channels())
    }

    /// Adds `g` (one value per channel) into the four bilinear taps at `uv`.
    pub fn scatter(&mut self, uv: DVec2, g: &[f64]) {
        let ch = self.grad.channels();
        debug_assert_eq!(g.len(), ch);
        for (texel, w) in self.grad.bilinear_taps(uv) {
            if w == 0.0 {
                continue;
            }
            self.touched[texel] = true;
            let px = self.grad.pixel_mut(texel);
            for k in 0..ch {
                px[k] += w * g[k];
            }
        }
    }
}

/// Accumulates per-pixel gradients in pixel order, so the texel sums are reproducible
/// regardless of how the per-pixel values were computed. `None` entries are skipped.
pub fn backprop_to_texture<'a>(
    target: &mut TextureGradient,
    pixels: impl IntoIterator<Item = Option<(DVec2, &'a [f64])>>,
) {
    for (uv, g) in pixels.into_iter().flatten() {
        target.scatter(uv, g);
    }
}
