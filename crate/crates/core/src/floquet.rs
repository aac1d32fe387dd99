//! Monodromy, self-matching Bloch solutions, the Hill discriminant and band edges.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::hyp::principal_sqrt;
use crate::model::{superpotential_phi1, ModelError, ModelParams, Parity};
use crate::numerics::{find_bracketed_root, NumericsError, PowerSeries};
use crate::spps::{check_tail, tail_estimate, term_bounds, CellPoint, CellSolutionSamples, SppsBasis, SppsError};

/// `|D² - 4|` below which the two Bloch factors are treated as equal.
pub const DEGENERACY_FLOOR: f64 = 1e-10;
/// `|Im D|` above which `D` is not considered real.
pub const DEFAULT_IM_TOL: f64 = 1e-8;
/// `||D| - 2|` accepted at a tangential band edge.
pub const DEFAULT_EDGE_TOL: f64 = 1e-5;
/// Smallest `|K²|` accepted by the Darboux combinations.
pub const MIN_DARBOUX_ENERGY: f64 = 1e-8;
/// Largest cell index reachable by [`bloch_extend`].
pub const MAX_CELLS: i64 = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FloquetError {
    #[error("K² = {k2} is too close to zero for the Darboux partner construction")]
    DegenerateTransform { k2: f64 },
    #[error("K² = {k2} is a band edge (D = {discriminant}); only one Bloch solution exists")]
    DegenerateEdge { k2: f64, discriminant: Complex64 },
    #[error("cell index {n} is outside the supported range ±{MAX_CELLS}")]
    CellRange { n: i64 },
    #[error("Bloch factor power r^{n} leaves the floating-point range")]
    Overflow { n: i64 },
    #[error("window [{min}, {max}] must contain the series centre K0² = {center}")]
    WindowExcludesCenter { min: f64, max: f64, center: f64 },
    #[error("invalid edge-search window [{min}, {max}]")]
    InvalidWindow { min: f64, max: f64 },
    #[error(transparent)]
    Spps(#[from] SppsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Which of the two partner equations a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    F,
    G,
}

/// Endpoint data of the normalized cell solutions over one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monodromy {
    pub a11: Complex64,
    pub a12: Complex64,
    pub a21: Complex64,
    pub a22: Complex64,
    pub k2: f64,
    pub problem: Problem,
}

impl Monodromy {
    fn from_endpoint(pt: &CellPoint, k2: f64, problem: Problem) -> Self {
        Self {
            a11: pt.f1,
            a12: pt.f2,
            a21: pt.f1_prime,
            a22: pt.f2_prime,
            k2,
            problem,
        }
    }

    pub fn determinant(&self) -> Complex64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// Hill discriminant `a11 + a22`.
    pub fn discriminant(&self) -> Complex64 {
        self.a11 + self.a22
    }
}

pub fn monodromy_f(basis: &SppsBasis, k2: f64) -> Result<Monodromy, FloquetError> {
    let pt = basis.eval_node(k2, basis.grid().n_intervals())?;
    Ok(Monodromy::from_endpoint(&pt, k2, Problem::F))
}

pub fn monodromy_g(basis: &SppsBasis, k2: f64) -> Result<Monodromy, FloquetError> {
    let pt = basis.eval_node(k2, basis.grid().n_intervals())?;
    let g = darboux_point(&pt, k2, basis.params())?;
    Ok(Monodromy::from_endpoint(&g, k2, Problem::G))
}

/// One Bloch solution `c1·u1 + c2·u2` with factor `r` per period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochBranch {
    pub c1: Complex64,
    pub c2: Complex64,
    pub r: Complex64,
}

impl BlochBranch {
    /// `α` of the form `u1 + α u2` (infinite for the pure `u2` branch).
    pub fn alpha(&self) -> Complex64 {
        self.c2 / self.c1
    }

    pub fn combine(&self, u1: Complex64, u2: Complex64) -> Complex64 {
        self.c1 * u1 + self.c2 * u2
    }
}

/// James self-matching solutions `F± = f1 + α± f2` (or `G±` for the g-problem).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfMatching {
    pub plus: BlochBranch,
    pub minus: BlochBranch,
    pub discriminant: Complex64,
    pub k2: f64,
    pub problem: Problem,
    /// Set when `a12 ≈ 0` and the quadratic for `α` degenerates to a linear equation.
    pub decoupled: bool,
}

impl SelfMatching {
    pub fn alpha_plus(&self) -> Complex64 {
        self.plus.alpha()
    }

    pub fn alpha_minus(&self) -> Complex64 {
        self.minus.alpha()
    }

    pub fn r_plus(&self) -> Complex64 {
        self.plus.r
    }

    pub fn r_minus(&self) -> Complex64 {
        self.minus.r
    }
}

/// `r± = (D ∓ √(D² - 4))/2`, principal square root.
pub fn bloch_factors(d: Complex64) -> (Complex64, Complex64) {
    let root = principal_sqrt(d * d - 4.0);
    ((d - root) * 0.5, (d + root) * 0.5)
}

pub fn self_matching(m: &Monodromy) -> Result<SelfMatching, FloquetError> {
    let d = m.discriminant();
    if (d * d - 4.0).norm() <= DEGENERACY_FLOOR {
        return Err(FloquetError::DegenerateEdge {
            k2: m.k2,
            discriminant: d,
        });
    }
    let (r_plus, r_minus) = bloch_factors(d);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let scale = m.a11.norm() + m.a22.norm() + 1.0;

    let (first, second, decoupled) = if m.a12.norm() <= 1e-13 * scale {
        // a12 = 0: f2 itself is a Bloch solution with factor a22.
        let alpha = m.a21 / (m.a11 - m.a22);
        (
            BlochBranch {
                c1: one,
                c2: alpha,
                r: m.a11,
            },
            BlochBranch {
                c1: zero,
                c2: one,
                r: m.a22,
            },
            true,
        )
    } else {
        let b = m.a11 - m.a22;
        let root = (b * b + m.a12 * m.a21 * 4.0).sqrt();
        let sign = if (b.conj() * root).re >= 0.0 { 1.0 } else { -1.0 };
        let q = -(b + root * sign) * 0.5;
        let (alpha1, alpha2) = if q.norm() == 0.0 {
            (zero, zero)
        } else {
            (q / m.a12, -m.a21 / q)
        };
        let branch = |alpha: Complex64| BlochBranch {
            c1: one,
            c2: alpha,
            r: m.a11 + alpha * m.a12,
        };
        (branch(alpha1), branch(alpha2), false)
    };
    // Pair each direct factor with the closer of r±.
    let (mut plus, mut minus) = if (first.r - r_plus).norm() <= (first.r - r_minus).norm() {
        (first, second)
    } else {
        (second, first)
    };
    plus.r = r_plus;
    minus.r = r_minus;
    Ok(SelfMatching {
        plus,
        minus,
        discriminant: d,
        k2: m.k2,
        problem: m.problem,
        decoupled,
    })
}

/// `r±ⁿ` applied to the self-matching combinations of cell values `(u1, u2)`
/// taken at `x - nΛ`.
pub fn bloch_extend(
    sm: &SelfMatching,
    u1: Complex64,
    u2: Complex64,
    n: i64,
) -> Result<(Complex64, Complex64), FloquetError> {
    if n.abs() > MAX_CELLS {
        return Err(FloquetError::CellRange { n });
    }
    let power = |r: Complex64| -> Result<Complex64, FloquetError> {
        let v = r.powi(n as i32);
        if !(v.re.is_finite() && v.im.is_finite()) || v.norm() == 0.0 {
            return Err(FloquetError::Overflow { n });
        }
        Ok(v)
    };
    Ok((
        power(sm.plus.r)? * sm.plus.combine(u1, u2),
        power(sm.minus.r)? * sm.minus.combine(u1, u2),
    ))
}

/// Cell index and local coordinate of `x`.
pub fn cell_of(x: f64, period: f64) -> (i64, f64) {
    let n = (x / period).floor();
    let local = (x - n * period).clamp(0.0, period);
    (n as i64, local)
}

/// Bloch solutions `f±(x)` of the f-problem at any real `x` within the cell range.
pub fn bloch_f_at(basis: &SppsBasis, sm: &SelfMatching, x: f64) -> Result<(Complex64, Complex64), FloquetError> {
    let (n, local) = cell_of(x, basis.params().period());
    if n.abs() > MAX_CELLS {
        return Err(FloquetError::CellRange { n });
    }
    let (u1, u2) = basis.eval_values_at(sm.k2, local)?;
    bloch_extend(sm, u1, u2, n)
}

/// Bloch solutions `g±(x)` of the g-problem; `sm` must come from [`monodromy_g`].
pub fn bloch_g_at(basis: &SppsBasis, sm: &SelfMatching, x: f64) -> Result<(Complex64, Complex64), FloquetError> {
    let (n, local) = cell_of(x, basis.params().period());
    if n.abs() > MAX_CELLS {
        return Err(FloquetError::CellRange { n });
    }
    let g = darboux_partner(basis, sm.k2, local)?;
    bloch_extend(sm, g.f1, g.f2, n)
}

/// Darboux partner from f-data at one point.
fn darboux_point(pt: &CellPoint, k2: f64, p: &ModelParams) -> Result<CellPoint, FloquetError> {
    if k2.abs() < MIN_DARBOUX_ENERGY {
        return Err(FloquetError::DegenerateTransform { k2 });
    }
    let phi = superpotential_phi1(pt.x, p)?;
    let s = p.coupling();
    let kk = Complex64::new(k2, 0.0);
    // f̃1 = (-S f1 + (K² - S²) f2)/K²,  f̃2 = -(f1 + S f2)/K²
    let t1 = (-s * pt.f1 + (kk - s * s) * pt.f2) / k2;
    let t1p = (-s * pt.f1_prime + (kk - s * s) * pt.f2_prime) / k2;
    let t2 = -(pt.f1 + s * pt.f2) / k2;
    let t2p = -(pt.f1_prime + s * pt.f2_prime) / k2;
    let g1 = t1p - phi * t1;
    let g2 = t2p - phi * t2;
    Ok(CellPoint {
        x: pt.x,
        f1: g1,
        f2: g2,
        f1_prime: -phi * g1 - t1 * k2,
        f2_prime: -phi * g2 - t2 * k2,
    })
}

/// Normalized g-problem cell solutions `(g1, g2, g1', g2')` at `x`.
pub fn darboux_partner(basis: &SppsBasis, k2: f64, x: f64) -> Result<CellPoint, FloquetError> {
    if k2.abs() < MIN_DARBOUX_ENERGY {
        return Err(FloquetError::DegenerateTransform { k2 });
    }
    basis.params().singular_set().check(x)?;
    let pt = basis.eval_at(k2, x)?;
    darboux_point(&pt, k2, basis.params())
}

/// g-problem cell solutions on every node; entries at excluded (pole) nodes are NaN.
pub fn darboux_partner_cell(basis: &SppsBasis, k2: f64) -> Result<CellSolutionSamples, FloquetError> {
    if k2.abs() < MIN_DARBOUX_ENERGY {
        return Err(FloquetError::DegenerateTransform { k2 });
    }
    let f = basis.eval_cell_solutions(k2)?;
    let p = basis.params();
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let mut out = CellSolutionSamples {
        k2,
        x: f.x.clone(),
        f1: Vec::with_capacity(f.len()),
        f2: Vec::with_capacity(f.len()),
        f1_prime: Vec::with_capacity(f.len()),
        f2_prime: Vec::with_capacity(f.len()),
    };
    for j in 0..f.len() {
        let g = if p.singular_set().is_excluded(f.x[j]) {
            CellPoint {
                x: f.x[j],
                f1: nan,
                f2: nan,
                f1_prime: nan,
                f2_prime: nan,
            }
        } else {
            darboux_point(&f.point(j), k2, p)?
        };
        out.f1.push(g.f1);
        out.f2.push(g.f2);
        out.f1_prime.push(g.f1_prime);
        out.f2_prime.push(g.f2_prime);
    }
    Ok(out)
}

/// Power series of the Hill discriminant about `K0²`.
#[derive(Debug, Clone)]
pub struct HillSeries {
    series: PowerSeries,
    derivative: PowerSeries,
    level_max: Vec<f64>,
    tail_tol: f64,
    period: f64,
    k0: f64,
}

impl HillSeries {
    pub fn from_basis(basis: &SppsBasis) -> Self {
        let end = basis.grid().n_intervals();
        let coefficients: Vec<Complex64> = (0..=basis.depth())
            .map(|n| basis.xt_tables()[2 * n].values()[end] + basis.x_tables()[2 * n].values()[end])
            .collect();
        let series = PowerSeries::new(Complex64::new(basis.center(), 0.0), coefficients);
        Self {
            derivative: series.derivative(),
            series,
            level_max: basis.level_max().to_vec(),
            tail_tol: basis.tail_tolerance(),
            period: basis.params().period(),
            k0: basis.params().k0(),
        }
    }

    pub fn center(&self) -> f64 {
        self.series.center().re
    }

    pub fn coefficients(&self) -> &[Complex64] {
        self.series.coefficients()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tol
    }

    /// `D(K²)` without a truncation check.
    pub fn eval(&self, k2: f64) -> Complex64 {
        self.series.eval(Complex64::new(k2, 0.0))
    }

    /// `dD/dK²` from the term-wise differentiated series.
    pub fn eval_derivative(&self, k2: f64) -> Complex64 {
        self.derivative.eval(Complex64::new(k2, 0.0))
    }

    pub fn truncation_tail(&self, k2: f64) -> f64 {
        tail_estimate(&term_bounds(&self.level_max, (k2 - self.center()).abs()))
    }

    pub fn check(&self, k2: f64) -> Result<(), FloquetError> {
        let bounds = term_bounds(&self.level_max, (k2 - self.center()).abs());
        Ok(check_tail(&bounds, k2, self.tail_tol)?)
    }

    /// `D(K²)` after checking the truncation tail.
    pub fn eval_checked(&self, k2: f64) -> Result<Complex64, FloquetError> {
        self.check(k2)?;
        Ok(self.eval(k2))
    }
}

pub fn hill_series(basis: &SppsBasis) -> HillSeries {
    HillSeries::from_basis(basis)
}

/// Spectrum membership: `|Re D| ≤ 2` and `|Im D| ≤ im_tol`.
pub fn in_spectrum(d: Complex64, im_tol: f64) -> bool {
    d.re.abs() <= 2.0 && d.im.abs() <= im_tol
}

/// Quasimomentum `P = arccos(D/2)/Λ` with `Re P ∈ [0, k0]` and `Im P ≥ 0` on the zone boundaries.
///
/// `D` with `|Im D| ≤ DEFAULT_IM_TOL` is treated as real.
pub fn quasimomentum_from_discriminant(d: Complex64, period: f64) -> Complex64 {
    let d = if d.im.abs() <= DEFAULT_IM_TOL {
        Complex64::new(d.re, 0.0)
    } else {
        d
    };
    let half = d * 0.5;
    let theta = if half.im == 0.0 && half.re >= 1.0 {
        Complex64::new(0.0, half.re.acosh())
    } else if half.im == 0.0 && half.re <= -1.0 {
        Complex64::new(PI, (-half.re).acosh())
    } else {
        let mut t = half.acos();
        if t.re < 0.0 {
            t = -t;
        }
        if t.re == 0.0 && t.im < 0.0 {
            t = -t;
        } else if t.re == PI && t.im < 0.0 {
            t = Complex64::new(PI, -t.im);
        }
        t
    };
    theta / period
}

pub fn dispersion(hs: &HillSeries, k2: f64) -> Result<Complex64, FloquetError> {
    let d = hs.eval_checked(k2)?;
    Ok(quasimomentum_from_discriminant(d, hs.period()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// `D` crosses `±2` (the seed edge at `K0²`).
    Transversal,
    /// `D` touches `±2` at an extremum, within the edge tolerance.
    Tangential,
    /// Extremum within ten times the edge tolerance of `±2`.
    Marginal,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Transversal => "transversal",
            EdgeKind::Tangential => "tangential",
            EdgeKind::Marginal => "marginal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandEdge {
    pub k2: f64,
    pub parity: Parity,
    pub n: u32,
    pub kind: EdgeKind,
    pub discriminant: Complex64,
}

/// Extremum of `D` that is not within tolerance of `±2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anomaly {
    pub k2: f64,
    pub discriminant: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandStructure {
    pub edges: Vec<BandEdge>,
    pub forbidden: Vec<(f64, f64)>,
    pub window: (f64, f64),
    pub anomalies: Vec<Anomaly>,
}

impl BandStructure {
    pub fn edge(&self, n: u32, parity: Parity) -> Option<&BandEdge> {
        self.edges.iter().find(|e| e.n == n && e.parity == parity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSearch {
    pub edge_tol: f64,
    pub im_tol: f64,
    pub root_tol: f64,
    /// Minimum number of samples across the window.
    pub samples: usize,
}

impl Default for EdgeSearch {
    fn default() -> Self {
        Self {
            edge_tol: DEFAULT_EDGE_TOL,
            im_tol: DEFAULT_IM_TOL,
            root_tol: 1e-12,
            samples: 4000,
        }
    }
}

fn parity_of(d: f64) -> Parity {
    if d >= 0.0 {
        Parity::Periodic
    } else {
        Parity::Antiperiodic
    }
}

/// Band edges and forbidden intervals of the spectrum inside `[k2_min, k2_max]`.
///
/// Tangential edges are the roots of `dD/dK²` at which `|D| = 2`; transversal
/// edges are sign changes of `D ∓ 2`. Extremum candidates far from `±2` are
/// returned as anomalies.
pub fn find_band_edges(
    hs: &HillSeries,
    k2_min: f64,
    k2_max: f64,
    opts: &EdgeSearch,
) -> Result<BandStructure, FloquetError> {
    if !(k2_min < k2_max) || !k2_min.is_finite() || !k2_max.is_finite() {
        return Err(FloquetError::InvalidWindow {
            min: k2_min,
            max: k2_max,
        });
    }
    let center = hs.center();
    if center < k2_min || center > k2_max {
        return Err(FloquetError::WindowExcludesCenter {
            min: k2_min,
            max: k2_max,
            center,
        });
    }
    hs.check(k2_min)?;
    hs.check(k2_max)?;

    let k0 = hs.k0();
    let width = k2_max - k2_min;
    let samples = opts.samples.max((8.0 * width / (k0 * k0)).ceil() as usize).max(16);
    let step = width / samples as f64;
    let grid: Vec<f64> = (0..=samples)
        .map(|i| if i == samples { k2_max } else { k2_min + step * i as f64 })
        .collect();
    let d: Vec<f64> = grid.iter().map(|&k| hs.eval(k).re).collect();
    let dd: Vec<f64> = grid.iter().map(|&k| hs.eval_derivative(k).re).collect();

    let mut found: Vec<BandEdge> = Vec::new();
    let mut anomalies = Vec::new();

    // Extrema of D.
    for i in 0..samples {
        let (a, b) = (grid[i], grid[i + 1]);
        if dd[i] == 0.0 || dd[i].signum() != dd[i + 1].signum() && dd[i + 1] != 0.0 {
            let k = find_bracketed_root(|k| hs.eval_derivative(k).re, a, b, opts.root_tol)?;
            let value = hs.eval(k);
            let deviation = (value.re.abs() - 2.0).abs();
            let kind = if deviation <= opts.edge_tol {
                EdgeKind::Tangential
            } else if deviation <= 10.0 * opts.edge_tol {
                EdgeKind::Marginal
            } else {
                anomalies.push(Anomaly {
                    k2: k,
                    discriminant: value,
                });
                continue;
            };
            found.push(BandEdge {
                k2: k,
                parity: parity_of(value.re),
                n: 0,
                kind,
                discriminant: value,
            });
        }
    }

    // Crossings of D = ±2.
    for parity in [Parity::Periodic, Parity::Antiperiodic] {
        let level = parity.discriminant();
        let above = |v: f64| v - level >= 0.0;
        for i in 0..samples {
            if above(d[i]) == above(d[i + 1]) {
                continue;
            }
            let k = if d[i] == level {
                grid[i]
            } else {
                find_bracketed_root(|k| hs.eval(k).re - level, grid[i], grid[i + 1], opts.root_tol)?
            };
            let near_touch = found
                .iter()
                .any(|e| e.parity == parity && e.kind != EdgeKind::Transversal && (e.k2 - k).abs() <= 2.0 * step);
            if near_touch {
                continue;
            }
            found.push(BandEdge {
                k2: k,
                parity,
                n: 0,
                kind: EdgeKind::Transversal,
                discriminant: hs.eval(k),
            });
        }
    }

    found.sort_by(|a, b| a.k2.total_cmp(&b.k2));
    found.dedup_by(|b, a| a.parity == b.parity && (b.k2 - a.k2).abs() <= 2.0 * step);

    let mut next_index = [0u32; 2];
    let mut previous: Option<Parity> = None;
    for e in found.iter_mut() {
        let slot = match e.parity {
            Parity::Periodic => 0,
            Parity::Antiperiodic => 1,
        };
        if previous == Some(e.parity) {
            e.n = next_index[slot] - 1;
        } else {
            e.n = next_index[slot];
            next_index[slot] += 1;
        }
        previous = Some(e.parity);
    }

    let mut bounds = vec![k2_min];
    bounds.extend(found.iter().map(|e| e.k2).filter(|&k| k > k2_min && k < k2_max));
    bounds.push(k2_max);
    let mut forbidden: Vec<(f64, f64)> = Vec::new();
    for w in bounds.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let mid = hs.eval(0.5 * (w[0] + w[1]));
        if in_spectrum(mid, opts.im_tol) {
            continue;
        }
        match forbidden.last_mut() {
            Some(last) if last.1 == w[0] => last.1 = w[1],
            _ => forbidden.push((w[0], w[1])),
        }
    }

    Ok(BandStructure {
        edges: found,
        forbidden,
        window: (k2_min, k2_max),
        anomalies,
    })
}
