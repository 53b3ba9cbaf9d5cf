//! Shared fixtures for the criterion benches.

use hexanneal::{build_lattice_for_target, generate_instance, IsingModel};

pub const SWEEP_TARGET: usize = 10_000;

pub fn instance(target: usize, include_cubic: bool, seed: u64) -> IsingModel {
    let graph = build_lattice_for_target(target).expect("benchmark lattice");
    generate_instance(&graph, include_cubic, seed)
}

/// `(n, time)` points with mild curvature for the fitting benches.
pub fn scaling_points() -> Vec<(f64, f64)> {
    [100.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0]
        .iter()
        .map(|&n: &f64| (n, 0.02 * (n / 700.0).exp() + 1e-4 * n))
        .collect()
}
