//! Deterministic random streams and low-level direction sampling helpers.

use glam::{DVec2, DVec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counter-based stream: the same `(seed, stream)` pair always yields the same sequence,
/// independent of which worker evaluates it or in which order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes several integers into one seed (splitmix64 finalizer).
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9e37_79b9_7f4a_7c15u64;
    for &p in parts {
        h ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = splitmix(h);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Jittered points on an `nx × ny` grid covering `[0,1)²`, with `nx·ny = n`.
pub fn stratified_2d(n: usize, rng: &mut impl Rng) -> Vec<DVec2> {
    let (nx, ny) = strata(n);
    let mut out = Vec::with_capacity(n);
    for j in 0..ny {
        for i in 0..nx {
            let u = (i as f64 + rng.gen::<f64>()) / nx as f64;
            let v = (j as f64 + rng.gen::<f64>()) / ny as f64;
            out.push(DVec2::new(u.min(ONE_MINUS_EPS), v.min(ONE_MINUS_EPS)));
        }
    }
    out
}

/// Randomly shifted (0, m, 2)-net for `n = 2^m` (van der Corput × second Sobol' dimension).
///
/// Every elementary box of area `1/n` holds exactly one point, in particular each cell of the
/// [`strata`] grid, so the set is a stratified grid sample with finer stratification on top.
/// Falls back to [`stratified_2d`] when `n` is not a power of two.
pub fn net_2d(n: usize, rng: &mut impl Rng) -> Vec<DVec2> {
    if !n.is_power_of_two() || n > 1 << 32 {
        return stratified_2d(n, rng);
    }
    let (s1, s2): (u32, u32) = (rng.gen(), rng.gen());
    let scale = 1.0 / 4_294_967_296.0;
    (0..n as u64)
        .map(|i| {
            let i = i as u32;
            let x = i.reverse_bits() ^ s1;
            let (mut y, mut v, mut k) = (0u32, 1u32 << 31, i);
            while k != 0 {
                if k & 1 == 1 {
                    y ^= v;
                }
                k >>= 1;
                v ^= v >> 1;
            }
            let y = y ^ s2;
            let u = (x as f64 + rng.gen::<f64>()) * scale;
            let w = (y as f64 + rng.gen::<f64>()) * scale;
            DVec2::new(u.min(ONE_MINUS_EPS), w.min(ONE_MINUS_EPS))
        })
        .collect()
}

const ONE_MINUS_EPS: f64 = 1.0 - f64::EPSILON / 2.0;

/// Largest divisor of `n` not above `sqrt(n)`, paired with its cofactor.
pub fn strata(n: usize) -> (usize, usize) {
    let n = n.max(1);
    let mut nx = (n as f64).sqrt() as usize;
    while nx > 1 && !n.is_multiple_of(nx) {
        nx -= 1;
    }
    (nx.max(1), n / nx.max(1))
}

/// Orthonormal basis around `n` (Duff et al. 2017).
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub tangent: DVec3,
    pub bitangent: DVec3,
    pub normal: DVec3,
}

impl Frame {
    pub fn from_normal(n: DVec3) -> Self {
        let sign = 1.0f64.copysign(n.z);
        let a = -1.0 / (sign + n.z);
        let b = n.x * n.y * a;
        let tangent = DVec3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x);
        let bitangent = DVec3::new(b, sign + n.y * n.y * a, -n.y);
        Frame {
            tangent,
            bitangent,
            normal: n,
        }
    }

    pub fn to_world(&self, local: DVec3) -> DVec3 {
        self.tangent * local.x + self.bitangent * local.y + self.normal * local.z
    }

    pub fn to_local(&self, world: DVec3) -> DVec3 {
        DVec3::new(
            world.dot(self.tangent),
            world.dot(self.bitangent),
            world.dot(self.normal),
        )
    }
}

/// Uniform direction on the unit sphere from `u ∈ [0,1)²`.
pub fn uniform_sphere(u: DVec2) -> DVec3 {
    let z = 1.0 - 2.0 * u.x;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * std::f64::consts::PI * u.y;
    DVec3::new(r * phi.cos(), r * phi.sin(), z)
}

pub fn luminance(c: DVec3) -> f64 {
    0.2126 * c.x + 0.7152 * c.y + 0.0722 * c.z
}
