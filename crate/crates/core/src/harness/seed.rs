//! Per-trial RNG seeds.
//!
//! `seed_for` packs (sweep index, series index, trial index) into one 64-bit
//! word (12 + 12 + 40 bits) and passes it through the SplitMix64 finaliser,
//! keyed by the master seed and an FNV-1a hash of the scenario id. The
//! finaliser is a bijection on `u64`, so distinct in-range tuples always get
//! distinct seeds for a given (master seed, scenario).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CajError, Result};

pub const MAX_SWEEP_POINTS: usize = 1 << 12;
pub const MAX_SERIES: usize = 1 << 12;
pub const MAX_TRIALS: u64 = 1 << 40;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn check_bounds(sweep_points: usize, series: usize, trials: u64) -> Result<()> {
    if sweep_points > MAX_SWEEP_POINTS || series > MAX_SERIES || trials > MAX_TRIALS {
        return Err(CajError::config(format!(
            "run exceeds seed space ({sweep_points} points, {series} series, {trials} trials)"
        )));
    }
    Ok(())
}

pub fn seed_for(master_seed: u64, scenario: &str, sweep: usize, series: usize, trial: u64) -> u64 {
    debug_assert!(sweep < MAX_SWEEP_POINTS && series < MAX_SERIES && trial < MAX_TRIALS);
    let key = splitmix64(master_seed ^ splitmix64(fnv1a64(scenario.as_bytes())));
    let packed = ((sweep as u64) << 52) | ((series as u64) << 40) | trial;
    splitmix64(key ^ packed)
}

pub fn trial_rng(master_seed: u64, scenario: &str, sweep: usize, series: usize, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed_for(master_seed, scenario, sweep, series, trial))
}
