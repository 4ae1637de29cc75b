//! Shared fixtures for the benchmarks.

use tadv_core::synth::{simulate_indicators, GeneratorSpec};
use tadv_core::IndicatorMatrix;

/// Indicator matrix drawn from the published measurement model.
pub fn indicators(n: usize, seed: u64) -> IndicatorMatrix {
    let mut spec = GeneratorSpec::paper_defaults();
    spec.seed = seed;
    simulate_indicators(&spec, n).expect("default spec is valid").matrix
}
