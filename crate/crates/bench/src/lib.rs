//! Fixtures shared by the benchmarks.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trevisan_core::params::{build_instance, preset_params, Preset, WeakSeedOptions};
use trevisan_core::{BitString, TrevisanInstance};

pub fn random_bytes(len: usize, seed: u64) -> Vec<u8> {
    let mut v = vec![0u8; len];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut v);
    v
}

pub fn random_bits(len: usize, seed: u64) -> BitString {
    BitString::from_bytes(&random_bytes(len.div_ceil(8), seed), len.div_ceil(8) * 8)
        .expect("length")
        .slice(0, len)
}

/// Uniform-seed preset instance.
pub fn cor1_instance(n: usize, m: usize, eps: f64) -> TrevisanInstance {
    let p = preset_params(Preset::Cor1, n, eps, m, 0.75, WeakSeedOptions::default()).expect("params");
    build_instance(&p, None).expect("instance")
}
