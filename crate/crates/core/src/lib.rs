//! Heavy-hex Ising instances with cubic terms, their binary reformulations,
//! simulated annealing and time-to-solution analysis.

pub mod analysis;
pub mod anneal;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod model;
pub mod reduce;
pub mod rng;

pub use analysis::{
    compute_tts, fit_scaling, histogram_approximation_ratios, select_best_fit, BestFit, FitFamily, FitResult,
    Histogram, Tts, TtsResult,
};
pub use anneal::{sample, sample_with, AnnealSchedule, Sample, SampleMode, SampleOptions, SampleSet};
pub use error::{Error, Result};
pub use exact::{brute_force, ingest_certificate, GroundTruth};
pub use lattice::{build_lattice, build_lattice_for_target, HeavyHexGraph, WTriple};
pub use model::{generate_instance, IsingModel, Provenance, SpectrumBounds, SpinVector};
pub use reduce::{
    export_lp_file, lift_to_lp, quadratize, quadratize_on_lattice, spin_to_binary, BinaryPolynomial,
    LinearProgramModel, QuadratizedModel, SolverSolution,
};
