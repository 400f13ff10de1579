//! Shared inputs for the benchmarks.

use clot_core::sim::{sample_scenario, scenario};
use clot_core::PairedOutcomes;

/// `m` draws per group from N(0, 1) vs N(1, 1).
pub fn moderate_shift(m: usize, seed: u64) -> PairedOutcomes {
    sample_scenario(&scenario("gaussian-moderate").expect("registered"), m, seed).expect("valid size")
}
