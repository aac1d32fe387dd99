//! Spectral parameter power series (SPPS) for the f-equation.
//!
//! Given the nodeless seed `f0` at `K0²`, the normalized cell solutions are
//!
//! ```text
//! f1 = f0/f0(0) · Σ̃0 + f0'(0) · f0 · Σ1
//! f2 = -f0(0) · f0 · Σ1
//! ```
//!
//! where, with `λ = K² - K0²`,
//!
//! ```text
//! Σ̃0 = Σ_{n≥0} X̃^(2n) λ^n      Σ̃1 = Σ_{n≥1} X̃^(2n-1) λ^(n-1)
//! Σ0  = Σ_{n≥0} X^(2n) λ^n       Σ1  = Σ_{n≥1} X^(2n-1) λ^(n-1)
//! ```
//!
//! and the tables are iterated integrals from 0 with `X̃^(0) = X^(0) = 1`:
//! odd levels of `X̃` integrate against `f0²` and even levels against
//! `-1/f0²`; `X` uses the opposite weights. Derivatives follow exactly from
//! `Σ̃0' = -λ Σ̃1 / f0²` and `Σ1' = -Σ0 / f0²`.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::hyp::{f0_bandedge_with_derivative, HypError};
use crate::model::{ModelError, ModelParams};
use crate::numerics::{cumulative_integral, horner, Grid, GridFunction, NumericsError};

pub const DEFAULT_DEPTH: usize = 40;
pub const DEFAULT_INTERVALS: usize = 8000;
/// Absolute bound on the estimated series tail accepted by evaluation.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;
/// Smallest `|f0|` on the grid accepted as nodeless.
pub const NODELESS_FLOOR: f64 = 1e-8;
pub const MIN_INTERVALS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SppsError {
    #[error("the cell grid needs an even number of intervals >= {MIN_INTERVALS}, got {0}")]
    InvalidIntervals(usize),
    #[error("series depth must be at least 1")]
    InvalidDepth,
    #[error("seed has {got} samples but the grid has {expected} nodes")]
    SeedLength { got: usize, expected: usize },
    #[error("seed solution is not nodeless: |f0({x})| = {modulus:e}")]
    SeedNotNodeless { x: f64, modulus: f64 },
    #[error(
        "series tail {tail:e} at K² = {k2} exceeds {tol:e} with depth {depth}; \
         increase the depth to about {suggested_depth}"
    )]
    Truncation {
        k2: f64,
        tail: f64,
        tol: f64,
        depth: usize,
        suggested_depth: usize,
    },
    #[error("x = {x} lies outside the cell [0, {period}]")]
    OutOfCell { x: f64, period: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Hyp(#[from] HypError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Precomputed recursive-integral tables on one cell. Immutable once built.
#[derive(Debug, Clone)]
pub struct SppsBasis {
    params: ModelParams,
    grid: Arc<Grid>,
    f0: GridFunction,
    f0_prime: Vec<Complex64>,
    f0_prime_at_0: Complex64,
    depth: usize,
    xt_tables: Vec<GridFunction>,
    x_tables: Vec<GridFunction>,
    level_max: Vec<f64>,
    tail_tol: f64,
}

/// Normalized cell solutions at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPoint {
    pub x: f64,
    pub f1: Complex64,
    pub f2: Complex64,
    pub f1_prime: Complex64,
    pub f2_prime: Complex64,
}

impl CellPoint {
    pub fn wronskian(&self) -> Complex64 {
        self.f1 * self.f2_prime - self.f1_prime * self.f2
    }
}

/// Normalized cell solutions on every grid node.
///
/// Derivatives are NaN at a node that coincides with a pole, where the seed
/// derivative has a logarithmic singularity.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSolutionSamples {
    pub k2: f64,
    pub x: Vec<f64>,
    pub f1: Vec<Complex64>,
    pub f2: Vec<Complex64>,
    pub f1_prime: Vec<Complex64>,
    pub f2_prime: Vec<Complex64>,
}

impl CellSolutionSamples {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn point(&self, j: usize) -> CellPoint {
        CellPoint {
            x: self.x[j],
            f1: self.f1[j],
            f2: self.f2[j],
            f1_prime: self.f1_prime[j],
            f2_prime: self.f2_prime[j],
        }
    }
}

struct Sums {
    st0: Complex64,
    st1: Complex64,
    s0: Complex64,
    s1: Complex64,
}

impl SppsBasis {
    /// Builds the basis from the hypergeometric seed sampled on an `n_intervals` grid.
    pub fn build(params: &ModelParams, n_intervals: usize, depth: usize) -> Result<Self, SppsError> {
        check_shape(n_intervals, depth)?;
        let grid = Grid::new(params.period(), n_intervals)?;
        let mut seed = Vec::with_capacity(grid.len());
        let mut seed_prime = Vec::with_capacity(grid.len());
        for &x in grid.points() {
            match f0_bandedge_with_derivative(x, params) {
                Ok((f, df)) => {
                    seed.push(f);
                    seed_prime.push(df);
                }
                Err(HypError::DivergentAtUnity { .. }) => {
                    seed.push(crate::hyp::f0_bandedge(x, params)?);
                    seed_prime.push(Complex64::new(f64::NAN, f64::NAN));
                }
                Err(e) => return Err(e.into()),
            }
        }
        Self::from_seed(params, n_intervals, depth, seed, seed_prime)
    }

    /// Builds the basis from arbitrary nodal samples of a nodeless solution at
    /// `K0²` and its derivative. `seed_prime[0]` must be finite.
    pub fn from_seed(
        params: &ModelParams,
        n_intervals: usize,
        depth: usize,
        seed: Vec<Complex64>,
        seed_prime: Vec<Complex64>,
    ) -> Result<Self, SppsError> {
        check_shape(n_intervals, depth)?;
        let grid = Arc::new(Grid::new(params.period(), n_intervals)?);
        for v in [&seed, &seed_prime] {
            if v.len() != grid.len() {
                return Err(SppsError::SeedLength {
                    got: v.len(),
                    expected: grid.len(),
                });
            }
        }
        for (&x, f) in grid.points().iter().zip(&seed) {
            let modulus = f.norm();
            if !(modulus > NODELESS_FLOOR) {
                return Err(SppsError::SeedNotNodeless { x, modulus });
            }
        }
        let f0_prime_at_0 = seed_prime[0];
        let square: Vec<Complex64> = seed.iter().map(|f| f * f).collect();
        let neg_inv_square: Vec<Complex64> = square.iter().map(|q| -q.inv()).collect();

        let levels = 2 * depth + 1;
        let one = GridFunction::new(Arc::clone(&grid), vec![Complex64::new(1.0, 0.0); grid.len()])?;
        let mut xt_tables = Vec::with_capacity(levels);
        let mut x_tables = Vec::with_capacity(levels);
        xt_tables.push(one.clone());
        x_tables.push(one);
        for n in 1..levels {
            let (wt, w) = if n % 2 == 1 {
                (&square, &neg_inv_square)
            } else {
                (&neg_inv_square, &square)
            };
            let xt = weighted_integral(&xt_tables[n - 1], wt)?;
            let x = weighted_integral(&x_tables[n - 1], w)?;
            xt_tables.push(xt);
            x_tables.push(x);
        }
        let level_max = xt_tables
            .iter()
            .zip(&x_tables)
            .map(|(a, b)| {
                a.values()
                    .iter()
                    .chain(b.values())
                    .map(|v| v.norm())
                    .fold(0.0, f64::max)
            })
            .collect();

        Ok(Self {
            params: *params,
            f0: GridFunction::new(Arc::clone(&grid), seed)?,
            grid,
            f0_prime: seed_prime,
            f0_prime_at_0,
            depth,
            xt_tables,
            x_tables,
            level_max,
            tail_tol: DEFAULT_TAIL_TOL,
        })
    }

    /// Replaces the absolute tail tolerance used to validate evaluations.
    pub fn with_tail_tolerance(mut self, tol: f64) -> Self {
        self.tail_tol = tol;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn f0(&self) -> &GridFunction {
        &self.f0
    }

    pub fn f0_prime(&self) -> &[Complex64] {
        &self.f0_prime
    }

    pub fn f0_prime_at_0(&self) -> Complex64 {
        self.f0_prime_at_0
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tol
    }

    pub fn xt_tables(&self) -> &[GridFunction] {
        &self.xt_tables
    }

    pub fn x_tables(&self) -> &[GridFunction] {
        &self.x_tables
    }

    /// Series centre `K0²`.
    pub fn center(&self) -> f64 {
        self.params.seed_energy()
    }

    /// Estimated magnitude of the neglected terms of the Σ-series at `K²`.
    ///
    /// Term `n` is bounded by the largest table entry at levels `2n` and
    /// `2n-1` times `|λ|^n`; the tail beyond the last retained term is
    /// extrapolated geometrically from the last two such bounds.
    pub fn truncation_tail(&self, k2: f64) -> f64 {
        tail_estimate(&self.term_bounds(k2))
    }

    fn term_bounds(&self, k2: f64) -> Vec<f64> {
        term_bounds(&self.level_max, (k2 - self.center()).abs())
    }

    /// Largest table magnitude per level, over both tables and all nodes.
    pub fn level_max(&self) -> &[f64] {
        &self.level_max
    }

    /// Fails with a truncation error when the tail at `K²` exceeds the tolerance.
    pub fn check_truncation(&self, k2: f64) -> Result<(), SppsError> {
        check_tail(&self.term_bounds(k2), k2, self.tail_tol)
    }

    fn sums_at(&self, j: usize, lam: Complex64, buf: &mut Vec<Complex64>) -> Sums {
        let m = self.depth;
        Sums {
            st0: level_sum(&self.xt_tables, j, (0..=m).map(|n| 2 * n), lam, buf),
            st1: level_sum(&self.xt_tables, j, (1..=m).map(|n| 2 * n - 1), lam, buf),
            s0: level_sum(&self.x_tables, j, (0..=m).map(|n| 2 * n), lam, buf),
            s1: level_sum(&self.x_tables, j, (1..=m).map(|n| 2 * n - 1), lam, buf),
        }
    }

    fn assemble(&self, j: usize, lam: Complex64, buf: &mut Vec<Complex64>) -> CellPoint {
        let Sums { st0, st1, s0, s1 } = self.sums_at(j, lam, buf);
        let f0 = self.f0.values()[j];
        let df0 = self.f0_prime[j];
        let c0 = self.f0.values()[0];
        let d0 = self.f0_prime_at_0;
        let lift = df0 * s1 - s0 / f0;
        CellPoint {
            x: self.grid.points()[j],
            f1: f0 / c0 * st0 + d0 * f0 * s1,
            f2: -c0 * f0 * s1,
            f1_prime: df0 / c0 * st0 - lam * st1 / (c0 * f0) + d0 * lift,
            f2_prime: -c0 * lift,
        }
    }

    /// `f1, f2, f1', f2'` on every node of the cell.
    pub fn eval_cell_solutions(&self, k2: f64) -> Result<CellSolutionSamples, SppsError> {
        self.check_truncation(k2)?;
        let lam = Complex64::new(k2 - self.center(), 0.0);
        let n = self.grid.len();
        let mut out = CellSolutionSamples {
            k2,
            x: self.grid.points().to_vec(),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f1_prime: Vec::with_capacity(n),
            f2_prime: Vec::with_capacity(n),
        };
        let mut buf = Vec::with_capacity(self.depth + 1);
        for j in 0..n {
            let pt = self.assemble(j, lam, &mut buf);
            out.f1.push(pt.f1);
            out.f2.push(pt.f2);
            out.f1_prime.push(pt.f1_prime);
            out.f2_prime.push(pt.f2_prime);
        }
        Ok(out)
    }

    /// Cell solutions at the node with index `j`.
    pub fn eval_node(&self, k2: f64, j: usize) -> Result<CellPoint, SppsError> {
        self.check_truncation(k2)?;
        let lam = Complex64::new(k2 - self.center(), 0.0);
        let mut buf = Vec::with_capacity(self.depth + 1);
        Ok(self.assemble(j, lam, &mut buf))
    }

    /// Cell solutions at an arbitrary `x ∈ [0, Λ]`.
    ///
    /// Off-node points use four-point Lagrange interpolation of the nodal
    /// values (O(h⁴)). Derivatives do not exist at a pole, and are refused
    /// whenever the interpolation stencil touches a pole node.
    pub fn eval_at(&self, k2: f64, x: f64) -> Result<CellPoint, SppsError> {
        let pt = self.interpolate(k2, x, true)?;
        if !(pt.f1_prime.re.is_finite() && pt.f2_prime.re.is_finite()) {
            let pole = self.params.singular_set().nearest_pole(x);
            return Err(ModelError::Singular { x, pole }.into());
        }
        Ok(pt)
    }

    /// `(f1, f2)` at an arbitrary `x ∈ [0, Λ]`, including the pole.
    pub fn eval_values_at(&self, k2: f64, x: f64) -> Result<(Complex64, Complex64), SppsError> {
        let pt = self.interpolate(k2, x, false)?;
        Ok((pt.f1, pt.f2))
    }

    fn interpolate(&self, k2: f64, x: f64, derivatives: bool) -> Result<CellPoint, SppsError> {
        self.check_truncation(k2)?;
        let period = self.params.period();
        let slack = 1e-12 * period;
        if !(x >= -slack && x <= period + slack) {
            return Err(SppsError::OutOfCell { x, period });
        }
        let x = x.clamp(0.0, period);
        let lam = Complex64::new(k2 - self.center(), 0.0);
        let mut buf = Vec::with_capacity(self.depth + 1);
        if let Some(j) = self.grid.node_index(x) {
            let mut pt = self.assemble(j, lam, &mut buf);
            pt.x = x;
            return Ok(pt);
        }
        let h = self.grid.spacing();
        let last = self.grid.n_intervals();
        let base = ((x / h).floor() as usize).saturating_sub(1).min(last - 3);
        let nodes: Vec<CellPoint> = (base..base + 4).map(|j| self.assemble(j, lam, &mut buf)).collect();
        let weights = lagrange_weights(&nodes.iter().map(|p| p.x).collect::<Vec<_>>(), x);
        let mix = |get: fn(&CellPoint) -> Complex64| -> Complex64 {
            nodes.iter().zip(&weights).map(|(p, &w)| get(p) * w).sum()
        };
        let nan = Complex64::new(f64::NAN, f64::NAN);
        Ok(CellPoint {
            x,
            f1: mix(|p| p.f1),
            f2: mix(|p| p.f2),
            f1_prime: if derivatives { mix(|p| p.f1_prime) } else { nan },
            f2_prime: if derivatives { mix(|p| p.f2_prime) } else { nan },
        })
    }
}

/// `Σ_k tables[levels_k][j] λ^k` by Horner.
fn level_sum(
    tables: &[GridFunction],
    j: usize,
    levels: impl Iterator<Item = usize>,
    lam: Complex64,
    buf: &mut Vec<Complex64>,
) -> Complex64 {
    buf.clear();
    buf.extend(levels.map(|l| tables[l].values()[j]));
    horner(buf, lam)
}

fn check_shape(n_intervals: usize, depth: usize) -> Result<(), SppsError> {
    if n_intervals < MIN_INTERVALS || n_intervals % 2 != 0 {
        return Err(SppsError::InvalidIntervals(n_intervals));
    }
    if depth == 0 {
        return Err(SppsError::InvalidDepth);
    }
    Ok(())
}

fn weighted_integral(prev: &GridFunction, weight: &[Complex64]) -> Result<GridFunction, SppsError> {
    let integrand: Vec<Complex64> = prev.values().iter().zip(weight).map(|(a, w)| a * w).collect();
    Ok(cumulative_integral(&GridFunction::new(
        Arc::clone(prev.grid()),
        integrand,
    )?)?)
}

/// Per-term bounds `T_n` from a level profile (see [`SppsBasis::truncation_tail`]).
pub(crate) fn term_bounds(level_max: &[f64], lam_abs: f64) -> Vec<f64> {
    let depth = (level_max.len() - 1) / 2;
    let mut bounds = Vec::with_capacity(depth + 1);
    bounds.push(level_max[0]);
    let mut pow = 1.0;
    for n in 1..=depth {
        let odd = level_max[2 * n - 1] * pow;
        pow *= lam_abs;
        let even = level_max[2 * n] * pow;
        bounds.push(odd.max(even));
    }
    bounds
}

pub(crate) fn check_tail(bounds: &[f64], k2: f64, tol: f64) -> Result<(), SppsError> {
    let tail = tail_estimate(bounds);
    if tail <= tol {
        return Ok(());
    }
    let depth = bounds.len() - 1;
    Err(SppsError::Truncation {
        k2,
        tail,
        tol,
        depth,
        suggested_depth: suggest_depth(bounds, tol, depth),
    })
}

pub(crate) fn tail_estimate(bounds: &[f64]) -> f64 {
    let last = bounds[bounds.len() - 1];
    if last == 0.0 {
        return 0.0;
    }
    let prev = bounds[bounds.len() - 2];
    let ratio = last / prev;
    if !(ratio < 1.0) {
        return f64::INFINITY;
    }
    last * ratio / (1.0 - ratio)
}

fn suggest_depth(bounds: &[f64], tol: f64, depth: usize) -> usize {
    let last = bounds[bounds.len() - 1];
    let ratio = last / bounds[bounds.len() - 2];
    if !(ratio < 1.0) || !(tol > 0.0) {
        return 2 * depth.max(1);
    }
    // Smallest m with last·ratio^(m+1)/(1-ratio) ≤ tol.
    let extra = ((tol * (1.0 - ratio) / last).ln() / ratio.ln()).ceil().max(1.0);
    depth + extra as usize
}

fn lagrange_weights(xs: &[f64], x: f64) -> Vec<f64> {
    (0..xs.len())
        .map(|i| {
            xs.iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .map(|(_, &xk)| (x - xk) / (xs[i] - xk))
                .product()
        })
        .collect()
}
