//! Counter-based Brownian increments.
//!
//! Every block of Gaussian draws is a pure function of `(seed, channel, step)`:
//! the key is hashed into the state of a small xoshiro generator which then
//! emits the block by ziggurat sampling. A realization can therefore be
//! replayed from any step, split across workers, or refined in time. Refinement subdivides each base increment by Brownian
//! bridges: level `r` yields `2^r` sub-increments per base step that sum
//! exactly (up to rounding) to the base increment.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of a key tuple. Distinct tuples give independent-looking outputs.
#[inline]
pub fn hash4(a: u64, b: u64, c: u64, d: u64) -> u64 {
    splitmix(splitmix(splitmix(splitmix(a) ^ b) ^ c) ^ d)
}

/// Uniform in `(0, 1]`.
#[inline]
fn unit_open(h: u64) -> f64 {
    ((h >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Standard normal pair by Box–Muller from the key `(stream, a, b, c)`.
#[inline]
pub fn normal_pair(stream: u64, a: u64, b: u64, c: u64) -> (f64, f64) {
    let h = hash4(stream, a, b, c);
    let u1 = unit_open(h);
    let u2 = unit_open(splitmix(h ^ 0xD1B5_4A32_D192_ED03));
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, co) = (TAU * u2).sin_cos();
    (r * co, r * s)
}

/// Single standard normal for key `(stream, a, b)`, index `i`.
#[inline]
pub fn normal(stream: u64, a: u64, b: u64, i: u64) -> f64 {
    let (z0, z1) = normal_pair(stream, a, b, i >> 1);
    if i & 1 == 0 {
        z0
    } else {
        z1
    }
}

/// Uniform in `[0, 1)` keyed like [`normal`]; used for reproducible initial conditions.
#[inline]
pub fn uniform(stream: u64, a: u64, b: u64, i: u64) -> f64 {
    (hash4(stream, a, b, i) >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Derive a child seed, e.g. one per realization.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    hash4(seed, 0x5EED, tag, index)
}

const CH_TRANSPORT: u64 = 0x7A_0001;
const CH_VISCOUS: u64 = 0x7A_0002;

/// One step's worth of increments: `ΔW^k` for the transport modes and
/// `ΔW̃^m` for the viscous (coordinate) fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Increments {
    pub transport: Vec<f64>,
    pub viscous: Vec<f64>,
}

impl Increments {
    pub fn zeros(n_modes: usize, dim: usize) -> Self {
        Increments {
            transport: vec![0.0; n_modes],
            viscous: vec![0.0; dim],
        }
    }
}

/// Seeded stream of Gaussian increments shared by every particle of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRealization {
    pub seed: u64,
    /// Base (coarsest) step.
    pub dt: f64,
    pub n_modes: usize,
    pub dim: usize,
    /// Number of bridge halvings applied to the base step.
    pub refinement: u32,
    /// Key of the viscous stream; defaults to the transport seed.
    pub viscous_seed: u64,
}

impl NoiseRealization {
    pub fn new(seed: u64, dt: f64, n_modes: usize, dim: usize) -> Self {
        NoiseRealization {
            seed,
            dt,
            n_modes,
            dim,
            refinement: 0,
            viscous_seed: seed,
        }
    }

    /// Same transport path, refined `level` times by Brownian bridges.
    pub fn refined(mut self, level: u32) -> Self {
        self.refinement = level;
        self
    }

    /// Same transport path, independent viscous path keyed by `stream`.
    pub fn with_viscous_stream(mut self, stream: u64) -> Self {
        self.viscous_seed = derive_seed(self.seed, CH_VISCOUS, stream);
        self
    }

    /// Step size of the emitted increments.
    pub fn step_dt(&self) -> f64 {
        self.dt / (1u64 << self.refinement) as f64
    }

    pub fn increments(&self, step: u64) -> Increments {
        let mut inc = Increments::zeros(self.n_modes, self.dim);
        self.fill(step, &mut inc);
        inc
    }

    /// Write the increments of `step` (counted in refined steps) into `out`.
    pub fn fill(&self, step: u64, out: &mut Increments) {
        debug_assert_eq!(out.transport.len(), self.n_modes);
        debug_assert_eq!(out.viscous.len(), self.dim);
        let r = self.refinement;
        if r == 0 {
            let sq = self.dt.sqrt();
            normal_block(self.seed, CH_TRANSPORT, step, sq, &mut out.transport);
            normal_block(self.viscous_seed, CH_VISCOUS, step, sq, &mut out.viscous);
        } else {
            let coarse = step >> r;
            let leaf = step & ((1u64 << r) - 1);
            self.bridge(self.seed, CH_TRANSPORT, coarse, leaf, &mut out.transport);
            self.bridge(self.viscous_seed, CH_VISCOUS, coarse, leaf, &mut out.viscous);
        }
    }

    fn bridge(&self, stream: u64, channel: u64, coarse: u64, leaf: u64, out: &mut [f64]) {
        let r = self.refinement;
        let mut h = self.dt;
        normal_block(stream, channel, coarse, h.sqrt(), out);
        let mut z = vec![0.0; out.len()];
        // heap index of the current node, root = 1
        let mut node = 1u64;
        for level in (0..r).rev() {
            let kick = 0.5 * h.sqrt();
            normal_block(stream, channel ^ (node << 32), coarse, kick, &mut z);
            let right = (leaf >> level) & 1 == 1;
            for (v, k) in out.iter_mut().zip(&z) {
                *v = if right { 0.5 * *v - k } else { 0.5 * *v + k };
            }
            node = 2 * node + right as u64;
            h *= 0.5;
        }
    }
}

/// `out[i] = scale · N_i` with the block `N` keyed by `(stream, channel, step)`.
pub fn normal_block(stream: u64, channel: u64, step: u64, scale: f64, out: &mut [f64]) {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(hash4(stream, channel, step, 0xB10C));
    for o in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *o = scale * z;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_is_identical() {
        let a = NoiseRealization::new(7, 1e-2, 5, 2);
        let b = NoiseRealization::new(7, 1e-2, 5, 2);
        for s in 0..20 {
            assert_eq!(a.increments(s), b.increments(s));
        }
        let c = NoiseRealization::new(8, 1e-2, 5, 2);
        assert_ne!(a.increments(3), c.increments(3));
    }

    #[test]
    fn base_increments_have_variance_dt() {
        let dt = 0.01;
        let noise = NoiseRealization::new(11, dt, 8, 2);
        let (mut s1, mut s2, mut n) = (0.0, 0.0, 0.0);
        for step in 0..5000 {
            let inc = noise.increments(step);
            for w in inc.transport.iter().chain(&inc.viscous) {
                s1 += w;
                s2 += w * w;
                n += 1.0;
            }
        }
        let mean = s1 / n;
        let var = s2 / n - mean * mean;
        assert!(mean.abs() < 4.0 * (dt / n).sqrt());
        // relative standard error of a variance estimate is sqrt(2/n)
        assert!((var / dt - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
    }

    #[test]
    fn refinement_sums_to_base_increment() {
        let base = NoiseRealization::new(3, 0.1, 4, 2);
        for level in 1..4u32 {
            let fine = base.refined(level);
            let m = 1u64 << level;
            assert!((fine.step_dt() - 0.1 / m as f64).abs() < 1e-16);
            for coarse in 0..10 {
                let b = base.increments(coarse);
                let mut acc = Increments::zeros(4, 2);
                for j in 0..m {
                    let f = fine.increments(coarse * m + j);
                    for (a, w) in acc.transport.iter_mut().zip(&f.transport) {
                        *a += w;
                    }
                    for (a, w) in acc.viscous.iter_mut().zip(&f.viscous) {
                        *a += w;
                    }
                }
                for i in 0..4 {
                    assert!((acc.transport[i] - b.transport[i]).abs() < 1e-14);
                    assert!((acc.viscous[i % 2] - b.viscous[i % 2]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn refined_increments_have_variance_fine_dt() {
        let fine = NoiseRealization::new(5, 0.08, 3, 2).refined(3);
        let dt = fine.step_dt();
        let (mut s2, mut n) = (0.0, 0.0);
        for step in 0..8000 {
            for w in fine.increments(step).transport {
                s2 += w * w;
                n += 1.0;
            }
        }
        assert!((s2 / n / dt - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
    }

    #[test]
    fn viscous_stream_is_independent_of_transport_stream() {
        let a = NoiseRealization::new(9, 0.01, 3, 2);
        let b = a.with_viscous_stream(1);
        let (ia, ib) = (a.increments(4), b.increments(4));
        assert_eq!(ia.transport, ib.transport);
        assert_ne!(ia.viscous, ib.viscous);
    }
}
