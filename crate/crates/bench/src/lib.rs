//! Shared fixtures for the benchmarks.

use sppsband::{hill_series, HillSeries, ModelParams, SppsBasis};

/// Coupling strengths of the reference discriminant plots.
pub const COUPLINGS: [f64; 3] = [0.1, 0.7, 1.5];

pub fn params(s: f64) -> ModelParams {
    ModelParams::new(1.0, s).expect("valid reference parameters")
}

pub fn basis(s: f64, n_intervals: usize, depth: usize) -> SppsBasis {
    SppsBasis::build(&params(s), n_intervals, depth).expect("reference basis builds")
}

pub fn hill(s: f64, n_intervals: usize, depth: usize) -> HillSeries {
    hill_series(&basis(s, n_intervals, depth))
}
