//! Shared fixtures for the benchmark targets.

use ekesdg_core::synthgen::{ClassSpec, DomainSpec};

/// The three-class layout used across benchmarks: two bulk classes and a
/// small rare class whose knowledge dimensions are domain-invariant.
pub fn bench_spec(seed: u64, bulk: usize, rare: usize) -> DomainSpec {
    let class = |name: &str, count: usize, mean: Vec<f64>| ClassSpec {
        name: name.into(),
        count,
        mean,
        cov_scale: 0.5,
        modes: 1,
        mode_spread: 0.0,
        shift: vec![],
        cov_multiplier_b: 1.0,
    };
    DomainSpec {
        dim: 4,
        seed,
        classes: vec![
            class("Noise", bulk, vec![4.0, 4.0, 1.0, 1.0]),
            class("RSN", bulk, vec![0.0, 8.0, 1.0, 1.0]),
            class("SOZ", rare, vec![8.0, 8.0, 2.5, 2.5]),
        ],
    }
}
