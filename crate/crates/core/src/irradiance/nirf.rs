use std::f64::consts::PI;
use std::path::Path;

use glam::{DVec2, DVec3};
use nalgebra::{DMatrix, DMatrixView};
use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gather_irradiance, IrradianceSource};
use crate::assets::write_atomic;
use crate::error::{Error, Result};
use crate::geometry::texel_surfels;
use crate::optimizer::{Adam, AdamConfig};
use crate::sampling::stream_rng;
use crate::tbl::TblLight;

const MAGIC: &[u8; 4] = b"NIrF";
const OUTPUTS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NirfConfig {
    pub width: usize,
    pub hidden_layers: usize,
    pub bands: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub samples: usize,
    /// Cosine samples per training target.
    pub gather_samples: usize,
    pub seed: u64,
}

impl Default for NirfConfig {
    fn default() -> Self {
        NirfConfig {
            width: 64,
            hidden_layers: 3,
            bands: 4,
            lr: 1e-4,
            epochs: 2000,
            batch: 16,
            samples: 1024,
            gather_samples: 2048,
            seed: 0,
        }
    }
}

/// Surface points with their gathered irradiance.
#[derive(Clone, Debug, Default)]
pub struct NirfSamples {
    pub positions: Vec<DVec3>,
    pub targets: Vec<DVec3>,
}

/// Draws `config.samples` distinct surfels of a `atlas_res²` atlas and gathers their
/// irradiance against the TBL.
pub fn nirf_training_set(tbl: &TblLight, atlas_res: usize, config: &NirfConfig) -> Result<NirfSamples> {
    let atlas = texel_surfels(&tbl.geometry().mesh, atlas_res, atlas_res)?;
    if atlas.surfels.is_empty() {
        return Err(Error::InvalidInput("mesh covers no texel of the atlas".into()));
    }
    let mut rng = stream_rng(config.seed, u64::MAX);
    let n = config.samples.min(atlas.surfels.len());
    let mut picked = index::sample(&mut rng, atlas.surfels.len(), n).into_vec();
    picked.sort_unstable();
    let surfels: Vec<_> = picked.iter().map(|&i| atlas.surfels[i]).collect();
    let targets = surfels
        .par_iter()
        .enumerate()
        .map(|(i, s)| gather_irradiance(tbl, s.position, s.normal, config.gather_samples, config.seed, i as u64))
        .collect();
    Ok(NirfSamples {
        positions: surfels.iter().map(|s| s.position).collect(),
        targets,
    })
}

/// Position-only irradiance MLP: sinusoidal encoding of the bbox-normalized position,
/// softplus hidden layers and a softplus output, so predictions are never negative.
#[derive(Clone, Debug, PartialEq)]
pub struct Nirf {
    lo: DVec3,
    hi: DVec3,
    bands: usize,
    /// Layer sizes from input to output.
    sizes: Vec<usize>,
    /// Per layer: weights (out × in, row-major) then biases.
    params: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct NirfTraining {
    pub nirf: Nirf,
    pub final_loss: f64,
    /// Mean batch loss of every epoch.
    pub epoch_losses: Vec<f64>,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Nirf {
    /// Xavier-uniform weights and zero biases drawn from `seed`.
    pub fn new(bounds: (DVec3, DVec3), width: usize, hidden_layers: usize, bands: usize, seed: u64) -> Self {
        let input = 3 + 6 * bands;
        let mut sizes = vec![input];
        sizes.extend(std::iter::repeat_n(width, hidden_layers));
        sizes.push(OUTPUTS);
        let mut rng = stream_rng(seed, 0x6e69_7266);
        let mut params = Vec::new();
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.gen_range(-limit..limit)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Nirf {
            lo: bounds.0,
            hi: bounds.1,
            bands,
            sizes,
            params,
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    /// Position mapped to `[-1, 1]³` by the bbox, then `sin/cos(2^k π p)` for each band.
    pub fn encode(&self, p: DVec3) -> Vec<f64> {
        let extent = (self.hi - self.lo).max(DVec3::splat(1e-9));
        let q = (p - self.lo) / extent * 2.0 - 1.0;
        let mut out = Vec::with_capacity(self.input_dim());
        out.extend(q.to_array());
        for k in 0..self.bands {
            let f = (1u64 << k) as f64 * PI;
            for c in q.to_array() {
                out.push((f * c).sin());
                out.push((f * c).cos());
            }
        }
        out
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.sizes.len() - 1);
        let mut offset = 0;
        for l in 0..self.sizes.len() - 1 {
            offsets.push(offset);
            offset += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        offsets
    }

    /// Transposed weights (in × out) and biases of layer `l`.
    fn layer(&self, l: usize, offset: usize) -> (DMatrixView<'_, f64>, &[f64]) {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let wt = DMatrixView::from_slice(&self.params[offset..offset + n_in * n_out], n_in, n_out);
        (wt, &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out])
    }

    /// Encoded inputs (one column per position) and the pre-activations of every layer.
    fn forward_batch(&self, positions: &[DVec3]) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
        let mut input = DMatrix::zeros(self.input_dim(), positions.len());
        for (j, p) in positions.iter().enumerate() {
            input.column_mut(j).copy_from_slice(&self.encode(*p));
        }
        let offsets = self.layer_offsets();
        let mut pre: Vec<DMatrix<f64>> = Vec::with_capacity(offsets.len());
        for (l, &off) in offsets.iter().enumerate() {
            let (wt, b) = self.layer(l, off);
            let mut z = match pre.last() {
                None => wt.tr_mul(&input),
                Some(prev) => wt.tr_mul(&prev.map(softplus)),
            };
            for mut col in z.column_iter_mut() {
                for (v, bias) in col.iter_mut().zip(b) {
                    *v += bias;
                }
            }
            pre.push(z);
        }
        (input, pre)
    }

    pub fn forward(&self, p: DVec3) -> DVec3 {
        let (_, pre) = self.forward_batch(&[p]);
        let z = pre.last().expect("at least one layer");
        DVec3::new(softplus(z[0]), softplus(z[1]), softplus(z[2]))
    }

    /// Mean squared log1p error over the batch; `grad` is overwritten with its gradient.
    pub fn loss_and_grad(&self, positions: &[DVec3], targets: &[DVec3], grad: &mut [f64]) -> f64 {
        assert_eq!(grad.len(), self.params.len());
        let norm = 1.0 / (positions.len() * OUTPUTS) as f64;
        let (input, pre) = self.forward_batch(positions);
        let layers = pre.len();
        let mut loss = 0.0;
        let mut delta = pre[layers - 1].clone();
        for (j, t) in targets.iter().enumerate() {
            for c in 0..OUTPUTS {
                let z = pre[layers - 1][(c, j)];
                let y = softplus(z);
                let r = y.ln_1p() - t[c].ln_1p();
                loss += r * r * norm;
                delta[(c, j)] = 2.0 * r * norm / (1.0 + y) * sigmoid(z);
            }
        }
        let offsets = self.layer_offsets();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let a_in = if l == 0 { input.clone() } else { pre[l - 1].map(softplus) };
            let dwt = &a_in * delta.transpose();
            grad[off..off + n_in * n_out].copy_from_slice(dwt.as_slice());
            for o in 0..n_out {
                grad[off + n_in * n_out + o] = delta.row(o).sum();
            }
            if l > 0 {
                let (wt, _) = self.layer(l, off);
                let mut next = wt * &delta;
                next.zip_apply(&pre[l - 1], |d, z| *d *= sigmoid(z));
                delta = next;
            }
        }
        loss
    }

    /// Mean squared log1p error without gradients.
    pub fn loss(&self, positions: &[DVec3], targets: &[DVec3]) -> f64 {
        let norm = 1.0 / (positions.len() * OUTPUTS) as f64;
        let (_, pre) = self.forward_batch(positions);
        let z = pre.last().expect("at least one layer");
        targets
            .iter()
            .enumerate()
            .map(|(j, t)| (0..OUTPUTS).map(|c| (softplus(z[(c, j)]).ln_1p() - t[c].ln_1p()).powi(2)).sum::<f64>() * norm)
            .sum()
    }

    /// Adam on minibatches; samples are reshuffled every epoch from a fixed seed.
    pub fn train(samples: &NirfSamples, bounds: (DVec3, DVec3), config: &NirfConfig) -> Result<NirfTraining> {
        if samples.positions.is_empty() || samples.positions.len() != samples.targets.len() {
            return Err(Error::InvalidInput("NIrF needs a non-empty, paired training set".into()));
        }
        if config.batch == 0 {
            return Err(Error::InvalidInput("NIrF batch size must be positive".into()));
        }
        if samples.targets.iter().any(|t| !t.is_finite() || t.min_element() < 0.0) {
            return Err(Error::InvalidInput("NIrF targets must be finite and non-negative".into()));
        }
        let mut nirf = Nirf::new(bounds, config.width, config.hidden_layers, config.bands, config.seed);
        let mut adam = Adam::new(AdamConfig::with_lr(config.lr), nirf.param_count());
        let mut grad = vec![0.0; nirf.param_count()];
        let mut order: Vec<usize> = (0..samples.positions.len()).collect();
        let mut rng = stream_rng(config.seed, 0x7368_7566);
        let mut epoch_losses = Vec::with_capacity(config.epochs);
        let (mut pos, mut tgt) = (Vec::with_capacity(config.batch), Vec::with_capacity(config.batch));
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            let mut batches = 0;
            for chunk in order.chunks(config.batch) {
                pos.clear();
                tgt.clear();
                pos.extend(chunk.iter().map(|&i| samples.positions[i]));
                tgt.extend(chunk.iter().map(|&i| samples.targets[i]));
                let loss = nirf.loss_and_grad(&pos, &tgt, &mut grad);
                if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::Divergence { what: "NIrF training", epoch });
                }
                adam.step(&mut nirf.params, &grad);
                total += loss;
                batches += 1;
            }
            epoch_losses.push(total / batches as f64);
        }
        let final_loss = nirf.loss(&samples.positions, &samples.targets);
        if !final_loss.is_finite() {
            return Err(Error::Divergence {
                what: "NIrF training",
                epoch: config.epochs,
            });
        }
        Ok(NirfTraining {
            nirf,
            final_loss,
            epoch_losses,
        })
    }

    /// Header (magic, input dim u32, width u32, hidden layers u16, outputs u16), bbox as
    /// 6 floats, then all parameters; everything little-endian 32-bit.
    pub fn to_bytes(&self) -> Vec<u8> {
        let hidden = self.sizes.len() - 2;
        let width = if hidden > 0 { self.sizes[1] } else { 0 };
        let mut out = Vec::with_capacity(16 + 4 * (6 + self.params.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.input_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(width as u32).to_le_bytes());
        out.extend_from_slice(&(hidden as u16).to_le_bytes());
        out.extend_from_slice(&(OUTPUTS as u16).to_le_bytes());
        for v in self.lo.to_array().into_iter().chain(self.hi.to_array()).chain(self.params.iter().copied()) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::InvalidInput(format!("NIrF weights: {m}"));
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(bad("missing header"));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let u16_at = |i: usize| u16::from_le_bytes(bytes[i..i + 2].try_into().unwrap()) as usize;
        let (input, width, hidden, outputs) = (u32_at(4), u32_at(8), u16_at(12), u16_at(14));
        if outputs != OUTPUTS || input < 3 || (input - 3) % 6 != 0 || (hidden > 0 && width == 0) {
            return Err(bad("unsupported layer sizes"));
        }
        let mut nirf = Nirf::new((DVec3::ZERO, DVec3::ONE), width, hidden, (input - 3) / 6, 0);
        let floats = 6 + nirf.params.len();
        if bytes.len() != 16 + 4 * floats {
            return Err(bad("payload size does not match the header"));
        }
        let values: Vec<f64> = bytes[16..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite value"));
        }
        nirf.lo = DVec3::new(values[0], values[1], values[2]);
        nirf.hi = DVec3::new(values[3], values[4], values[5]);
        nirf.params.copy_from_slice(&values[6..]);
        Ok(nirf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

impl IrradianceSource for Nirf {
    fn irradiance(&self, position: DVec3, _uv: DVec2) -> DVec3 {
        self.forward(position)
    }
}
