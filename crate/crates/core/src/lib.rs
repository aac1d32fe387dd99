//! Bloch solutions, Hill discriminants and band structure for a SUSY-coupled
//! family of singular periodic Sturm–Liouville problems.
//!
//! The potential pair `ν1,c`, `ν2,c` built from the superpotential
//! `Φ1 = -k0 tan(k0 x) + i s` is solved on one period by a spectral parameter
//! power series seeded with a nodeless hypergeometric solution. Monodromy,
//! James self-matching solutions, the Hill discriminant series and band edges
//! follow from the cell solutions; an exact hypergeometric oracle is provided
//! for validation.
//!
//! ```
//! use sppsband::{hill_series, ModelParams, SppsBasis};
//!
//! let p = ModelParams::new(1.0, 0.1).unwrap();
//! let basis = SppsBasis::build(&p, 2000, 40).unwrap();
//! let d = hill_series(&basis).eval(0.25);
//! let exact = 2.0 * (std::f64::consts::PI * 1.46f64.sqrt()).cos();
//! assert!((d.re - exact).abs() < 1e-6);
//! ```

// Negated comparisons deliberately reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod floquet;
pub mod hyp;
pub mod model;
pub mod numerics;
pub mod spps;

use thiserror::Error;

pub use floquet::{
    bloch_extend, bloch_f_at, bloch_g_at, darboux_partner, darboux_partner_cell, dispersion, find_band_edges,
    hill_series, in_spectrum, monodromy_f, monodromy_g, self_matching, Anomaly, BandEdge, BandStructure, BlochBranch,
    EdgeKind, EdgeSearch, FloquetError, HillSeries, Monodromy, Problem, SelfMatching,
};
pub use hyp::{BlochPairExact, HypError, HypExponents};
pub use model::{ModelError, ModelParams, Parity};
pub use numerics::{Grid, GridFunction, NumericsError, PowerSeries};
pub use spps::{CellPoint, CellSolutionSamples, SppsBasis, SppsError};

/// Any error raised by the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Hyp(#[from] HypError),
    #[error(transparent)]
    Spps(#[from] SppsError),
    #[error(transparent)]
    Floquet(#[from] FloquetError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
