//! Per-run seed derivation.
//!
//! `run_seed(master, i)` is output `i + 1` of a SplitMix64 generator started
//! at state `master`, so any single run can be regenerated without the
//! others. The run seed drives the simulator's symbol and noise streams; the
//! channel realization uses `splitmix64(run_seed)`, the next value of a
//! generator started at the run seed, so the two never share a random stream.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 step from `state`: advance by the golden gamma, then mix.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_seed(master_seed: u64, run_id: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(run_id.wrapping_mul(GAMMA)))
}

pub fn channel_seed(run_seed: u64) -> u64 {
    splitmix64(run_seed)
}
