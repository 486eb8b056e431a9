use glam::{DVec2, DVec3};

use crate::error::{Error, Result};

/// A `width × height` grid of float samples with 1 or 3 channels.
///
/// Rows are stored bottom row first, matching PFM. Texture coordinate `v = 0` is the bottom
/// edge and sampling clamps at the borders.
#[derive(Clone, Debug, PartialEq)]
pub struct TextureImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl TextureImage {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        TextureImage {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn filled(width: usize, height: usize, value: &[f64]) -> Self {
        let mut img = Self::new(width, height, value.len());
        for px in img.data.chunks_mut(value.len()) {
            px.copy_from_slice(value);
        }
        img
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!("{channels} channels")));
        }
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "{}x{}x{} image needs {} values, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        Ok(TextureImage {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &TextureImage) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn pixel(&self, index: usize) -> &[f64] {
        &self.data[index * self.channels..(index + 1) * self.channels]
    }

    pub fn pixel_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.data[index * self.channels..(index + 1) * self.channels]
    }

    /// RGB value of pixel `index`; single-channel images are replicated.
    pub fn rgb(&self, index: usize) -> DVec3 {
        let p = self.pixel(index);
        if self.channels == 1 {
            DVec3::splat(p[0])
        } else {
            DVec3::new(p[0], p[1], p[2])
        }
    }

    pub fn set_rgb(&mut self, index: usize, value: DVec3) {
        let channels = self.channels;
        let p = self.pixel_mut(index);
        if channels == 1 {
            p[0] = value.x;
        } else {
            p.copy_from_slice(&value.to_array());
        }
    }

    /// The four texels touched by a bilinear lookup at `uv`, with their weights.
    ///
    /// Texel `(i, j)` has its center at `((i + 0.5)/W, (j + 0.5)/H)`; weights sum to one.
    pub fn bilinear_taps(&self, uv: DVec2) -> [(usize, f64); 4] {
        let x = uv.x * self.width as f64 - 0.5;
        let y = uv.y * self.height as f64 - 0.5;
        let (x0, x1, fx) = axis_taps(x, self.width);
        let (y0, y1, fy) = axis_taps(y, self.height);
        [
            (y0 * self.width + x0, (1.0 - fx) * (1.0 - fy)),
            (y0 * self.width + x1, fx * (1.0 - fy)),
            (y1 * self.width + x0, (1.0 - fx) * fy),
            (y1 * self.width + x1, fx * fy),
        ]
    }

    pub fn sample(&self, uv: DVec2) -> DVec3 {
        self.bilinear_taps(uv)
            .iter()
            .fold(DVec3::ZERO, |acc, &(i, w)| if w == 0.0 { acc } else { acc + self.rgb(i) * w })
    }

    pub fn sample_scalar(&self, uv: DVec2) -> f64 {
        self.bilinear_taps(uv).iter().fold(0.0, |acc, &(i, w)| {
            if w == 0.0 {
                acc
            } else {
                acc + self.data[i * self.channels] * w
            }
        })
    }

    /// Texel-center coordinate of texel index `i`.
    pub fn texel_center(&self, index: usize) -> DVec2 {
        texel_center(index % self.width, index / self.width, self.width, self.height)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> TextureImage {
        TextureImage {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn scaled(&self, k: f64) -> TextureImage {
        self.map(|v| v * k)
    }

    /// Index of the first non-finite sample, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }
}

pub fn texel_center(x: usize, y: usize, width: usize, height: usize) -> DVec2 {
    DVec2::new((x as f64 + 0.5) / width as f64, (y as f64 + 0.5) / height as f64)
}

fn axis_taps(x: f64, n: usize) -> (usize, usize, f64) {
    let last = n as f64 - 1.0;
    if x <= 0.0 {
        return (0, 0, 0.0);
    }
    if x >= last {
        return (n - 1, n - 1, 0.0);
    }
    let i = x.floor();
    let f = x - i;
    let i = i as usize;
    (i, (i + 1).min(n - 1), f)
}

/// Per-pixel integer labels; 0 means unlabeled.
///
/// Rows are kept in file order (top row first, as stored by PGM); use [`MaskImage::at_uv`]
/// or [`MaskImage::at_texel`] for lookups in bottom-up texture coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskImage {
    width: usize,
    height: usize,
    ids: Vec<u32>,
}

impl MaskImage {
    pub fn new(width: usize, height: usize) -> Self {
        MaskImage {
            width,
            height,
            ids: vec![0; width * height],
        }
    }

    pub fn from_ids(width: usize, height: usize, ids: Vec<u32>) -> Result<Self> {
        if ids.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height} mask needs {} ids, got {}",
                width * height,
                ids.len()
            )));
        }
        Ok(MaskImage { width, height, ids })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Ids in file order (top row first).
    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// Id of texel `(x, y)` with `y` counted from the bottom row.
    pub fn at_texel(&self, x: usize, y: usize) -> u32 {
        self.ids[(self.height - 1 - y) * self.width + x]
    }

    pub fn set_texel(&mut self, x: usize, y: usize, id: u32) {
        self.ids[(self.height - 1 - y) * self.width + x] = id;
    }

    /// Nearest-texel lookup (ids are not interpolated).
    pub fn at_uv(&self, uv: DVec2) -> u32 {
        let x = ((uv.x * self.width as f64).floor().max(0.0) as usize).min(self.width - 1);
        let y = ((uv.y * self.height as f64).floor().max(0.0) as usize).min(self.height - 1);
        self.at_texel(x, y)
    }

    pub fn max_id(&self) -> u32 {
        self.ids.iter().copied().max().unwrap_or(0)
    }

    /// Distinct nonzero ids in ascending order.
    pub fn labels(&self) -> Vec<u32> {
        let mut l: Vec<u32> = self.ids.iter().copied().filter(|&i| i != 0).collect();
        l.sort_unstable();
        l.dedup();
        l
    }
}
