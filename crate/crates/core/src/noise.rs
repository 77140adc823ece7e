//! Reproducible Brownian increments.
//!
//! Every random stream is a ChaCha8 keystream selected by the master seed and
//! a 64-bit stream id derived from `(domain, replicate, slot)`. Streams for
//! different domains never coincide, so input draws are independent of the
//! channel noise by construction, and a replicate's draws do not depend on
//! which worker computes it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::TimeGrid;

/// Disjoint stream families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamDomain {
    Noise = 0x6e6f_6973_6500_0001,
    Input = 0x696e_7075_7400_0002,
    Probe = 0x7072_6f62_6500_0003,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream id for `(domain, replicate, slot)`. `slot` separates per-r
/// streams when noise is not shared across SNR values.
pub fn stream_id(domain: StreamDomain, replicate: u64, slot: u64) -> u64 {
    splitmix64(splitmix64(domain as u64 ^ splitmix64(replicate)) ^ slot.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn stream_rng(master_seed: u64, domain: StreamDomain, replicate: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(domain, replicate, slot));
    rng
}

/// Discretized Brownian increments `ΔW_k ~ Normal(0, Δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBundle {
    increments: Vec<f64>,
    master_seed: u64,
    replicate: u64,
}

impl NoiseBundle {
    pub fn generate(grid: &TimeGrid, master_seed: u64, replicate: u64) -> Self {
        Self::generate_in_slot(grid, master_seed, replicate, 0)
    }

    pub fn generate_in_slot(grid: &TimeGrid, master_seed: u64, replicate: u64, slot: u64) -> Self {
        let mut rng = stream_rng(master_seed, StreamDomain::Noise, replicate, slot);
        let sd = grid.dt().sqrt();
        let increments = (0..grid.n_steps())
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect();
        Self { increments, master_seed, replicate }
    }

    /// Wraps explicit increments, e.g. all-zero noise for deterministic checks.
    pub fn from_increments(increments: Vec<f64>) -> Self {
        Self { increments, master_seed: 0, replicate: 0 }
    }

    #[inline]
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }
}
