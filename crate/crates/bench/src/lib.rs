//! Benchmark helpers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use slp_core::channel::ArrayConfig;
use slp_core::scenario::{random_instance, Instance};

pub const N_GRID: [usize; 4] = [16, 32, 64, 128];
pub const N_USERS: usize = 4;

/// One fixed-seed ULA instance at 20 dB with `α = 0.95` and 8PSK.
pub fn bench_instance(n: usize, k: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64 * 1000 + k as u64);
    random_instance(&mut rng, ArrayConfig::ula(n, 1), k, 0.95, 20.0, 8).expect("valid bench instance")
}
