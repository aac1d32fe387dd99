//! Exact-solution oracle built on the Gauss hypergeometric function.
//!
//! With `z = -e^{-2ik0x}` (which runs once around the unit circle per period)
//! the f-equation is solved by
//!
//! ```text
//! f_{c,1}(x) = (-1)^{q1-1/2} e^{-iPx} ₂F₁(p1+q1-1, p1-q1; 2p1; z)
//! f_{c,2}(x) = (-1)^{q1-1/2} e^{+iPx} ₂F₁(q1-p1, 1-p1-q1; 2-2p1; z)
//! ```
//!
//! where `P = (2p1-1) k0 = √((k0+s)² + K²)` is the quasimomentum. These are
//! used to validate the series solver, never inside it (except for the seed
//! `f0`, which is the `P = 0` member of the family).
//!
//! ₂F₁ is needed on the whole closed unit disk, including the points
//! `z = e^{±iπ/3}` where every linear transformation has modulus one and the
//! point `z = 1` which the circle touches at each potential pole. Away from the
//! disk centre it is obtained by analytic continuation of the hypergeometric
//! ODE with Taylor steps, and at `z = 1` itself by Gauss's summation theorem.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{superpotential_phi1, ModelError, ModelParams, Parity};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HypError {
    #[error("invalid hypergeometric parameters: {0}")]
    InvalidParameter(String),
    #[error("argument z = {z} lies outside the closed unit disk")]
    Domain { z: Complex64 },
    #[error("hypergeometric series did not converge after {terms} terms")]
    NonConvergence { terms: usize },
    #[error("hypergeometric function diverges at z = 1 (Re(c-a-b) = {excess})")]
    DivergentAtUnity { excess: f64 },
    #[error("K² = {k2} is a band edge: the two Bloch solutions coincide")]
    DegeneratePair { k2: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest |z| (or Pfaff-transformed |z|) summed directly.
const DIRECT_RADIUS: f64 = 0.75;
/// Radius of the circle on which continuation paths start.
const CONTINUATION_START: f64 = 0.5;
/// Distance from 1 below which Gauss's theorem replaces the function value.
const UNITY_SNAP: f64 = 1e-14;
const SERIES_EPS: f64 = 1e-16;
const MAX_SERIES_TERMS: usize = 1_000_000;
const MAX_TAYLOR_TERMS: usize = 4_000;
const MAX_CONTINUATION_STEPS: usize = 10_000;

/// Principal square root with the branch cut on the negative real axis and
/// `Im ≥ 0` on the cut itself.
pub fn principal_sqrt(z: Complex64) -> Complex64 {
    if z.im == 0.0 {
        if z.re >= 0.0 {
            Complex64::new(z.re.sqrt(), 0.0)
        } else {
            Complex64::new(0.0, (-z.re).sqrt())
        }
    } else {
        z.sqrt()
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Complex Γ(z) (Lanczos, g = 7), with reflection for `Re z < 1/2`.
pub fn gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        return PI / ((z * PI).sin() * gamma(ONE - z));
    }
    let z = z - 1.0;
    let mut acc = Complex64::new(LANCZOS[0], 0.0);
    for (k, &coef) in LANCZOS.iter().enumerate().skip(1) {
        acc += coef / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powc(z + 0.5) * (-t).exp() * acc
}

fn is_nonpositive_integer(c: Complex64) -> bool {
    let r = c.re.round();
    r <= 0.0 && (c.re - r).abs() < 1e-13 && c.im.abs() < 1e-13
}

/// ₂F₁(a, b; c; z) for `|z| ≤ 1`.
pub fn gauss_2f1(a: Complex64, b: Complex64, c: Complex64, z: Complex64) -> Result<Complex64, HypError> {
    evaluate(a, b, c, z, false).map(|(f, _)| f)
}

/// ₂F₁(a, b; c; z) together with its z-derivative.
///
/// The derivative is `(ab/c) ₂F₁(a+1, b+1; c+1; z)`; at `z = 1` it exists only
/// when `Re(c-a-b) > 1`.
pub fn gauss_2f1_with_derivative(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    z: Complex64,
) -> Result<(Complex64, Complex64), HypError> {
    evaluate(a, b, c, z, true)
}

fn evaluate(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    z: Complex64,
    want_derivative: bool,
) -> Result<(Complex64, Complex64), HypError> {
    for (name, v) in [("a", a), ("b", b), ("c", c), ("z", z)] {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(HypError::InvalidParameter(format!("{name} = {v} is not finite")));
        }
    }
    if is_nonpositive_integer(c) {
        return Err(HypError::InvalidParameter(format!("c = {c} is a non-positive integer")));
    }
    if a == ZERO || b == ZERO {
        return Ok((ONE, ZERO));
    }
    let r = z.norm();
    if r > 1.0 + 1e-12 {
        return Err(HypError::Domain { z });
    }
    if r <= DIRECT_RADIUS {
        return direct_series(a, b, c, z);
    }
    let w = z / (z - 1.0);
    if w.norm() <= DIRECT_RADIUS {
        let (g, dg) = direct_series(a, c - b, c, w)?;
        let one_minus = ONE - z;
        let pref = one_minus.powc(-a);
        let f = pref * g;
        let df = a * pref / one_minus * g - pref * dg / (one_minus * one_minus);
        return Ok((f, df));
    }
    if (ONE - z).norm() <= UNITY_SNAP {
        let value = gauss_sum(a, b, c)?;
        let derivative = if want_derivative {
            a * b / c * gauss_sum(a + 1.0, b + 1.0, c + 1.0)?
        } else {
            ZERO
        };
        return Ok((value, derivative));
    }
    continue_to(a, b, c, z)
}

/// Gauss's theorem: ₂F₁(a, b; c; 1) = Γ(c)Γ(c-a-b) / (Γ(c-a)Γ(c-b)).
fn gauss_sum(a: Complex64, b: Complex64, c: Complex64) -> Result<Complex64, HypError> {
    let excess = c - a - b;
    if excess.re <= 0.0 {
        return Err(HypError::DivergentAtUnity { excess: excess.re });
    }
    let num = gamma(c) * gamma(excess);
    let den = gamma(c - a) * gamma(c - b);
    // 1/Γ vanishes at non-positive integers; the product is then zero.
    if den.norm() == f64::INFINITY {
        return Ok(ZERO);
    }
    Ok(num / den)
}

/// Direct Maclaurin series for value and derivative.
fn direct_series(a: Complex64, b: Complex64, c: Complex64, z: Complex64) -> Result<(Complex64, Complex64), HypError> {
    let mut coef = ONE;
    let mut zpow_prev = ONE; // z^{n-1}
    let mut sum = ONE;
    let mut dsum = ZERO;
    let mut quiet = 0;
    for n in 1..MAX_SERIES_TERMS {
        let nf = n as f64;
        coef *= (a + (nf - 1.0)) * (b + (nf - 1.0)) / ((c + (nf - 1.0)) * nf);
        if coef == ZERO {
            return Ok((sum, dsum));
        }
        let dterm = coef * nf * zpow_prev;
        zpow_prev *= z;
        let term = coef * zpow_prev;
        sum += term;
        dsum += dterm;
        if term.norm() <= SERIES_EPS * sum.norm() && dterm.norm() <= SERIES_EPS * dsum.norm() {
            quiet += 1;
            if quiet >= 2 {
                return Ok((sum, dsum));
            }
        } else {
            quiet = 0;
        }
    }
    Err(HypError::NonConvergence {
        terms: MAX_SERIES_TERMS,
    })
}

/// Analytic continuation along the ray from `|z| = 0.5` to `z`.
///
/// Each step re-expands the solution of
/// `z(1-z) w'' + [c - (a+b+1) z] w' - ab w = 0` in a Taylor series about the
/// current point and advances by at most half the distance to the nearest
/// singular point (0 or 1), so every local series converges at least like 2^-k.
fn continue_to(a: Complex64, b: Complex64, c: Complex64, z: Complex64) -> Result<(Complex64, Complex64), HypError> {
    let mut zc = z * (CONTINUATION_START / z.norm());
    let (mut w, mut dw) = direct_series(a, b, c, zc)?;
    let ab = a * b;
    let apb1 = a + b + 1.0;
    for _ in 0..MAX_CONTINUATION_STEPS {
        let remaining = z - zc;
        let dist = remaining.norm();
        if dist == 0.0 {
            return Ok((w, dw));
        }
        let reach = 0.5 * zc.norm().min((zc - 1.0).norm());
        let (h, last) = if dist <= reach {
            (remaining, true)
        } else {
            (remaining * (reach / dist), false)
        };
        let (nw, ndw) = taylor_step(ab, apb1, c, zc, w, dw, h)?;
        w = nw;
        dw = ndw;
        zc += h;
        if last {
            return Ok((w, dw));
        }
    }
    Err(HypError::NonConvergence {
        terms: MAX_CONTINUATION_STEPS,
    })
}

fn taylor_step(
    ab: Complex64,
    apb1: Complex64,
    c: Complex64,
    z0: Complex64,
    w0: Complex64,
    w1: Complex64,
    h: Complex64,
) -> Result<(Complex64, Complex64), HypError> {
    // With z = z0 + t:  z(1-z) = A0 + A1 t - t²,  c - (a+b+1) z = B0 + B1 t.
    let a0 = z0 * (ONE - z0);
    let a1 = ONE - z0 * 2.0;
    let b0 = c - apb1 * z0;
    let b1 = -apb1;
    // Coefficients are carried pre-multiplied by h^k to keep them O(1).
    let (mut prev, mut cur) = (w0, w1 * h); // u_k = w_k h^k
    let mut value = prev + cur;
    let mut deriv = w1; // Σ k w_k h^{k-1}
    let h2 = h * h;
    let mut quiet = 0;
    for k in 0..MAX_TAYLOR_TERMS {
        let kf = k as f64;
        // w_{k+2} = -[(A1 k(k+1) + B0 (k+1)) w_{k+1} + (-k(k-1) + B1 k - ab) w_k] / (A0 (k+1)(k+2))
        let c_next = (a1 * (kf * (kf + 1.0)) + b0 * (kf + 1.0)) * cur * h;
        let c_prev = (b1 * kf - ab - kf * (kf - 1.0)) * prev * h2;
        let next = -(c_next + c_prev) / (a0 * ((kf + 1.0) * (kf + 2.0)));
        value += next;
        let dterm = next * ((kf + 2.0) / h);
        deriv += dterm;
        if next.norm() <= SERIES_EPS * value.norm() && dterm.norm() <= SERIES_EPS * deriv.norm() {
            quiet += 1;
            if quiet >= 3 {
                return Ok((value, deriv));
            }
        } else {
            quiet = 0;
        }
        prev = cur;
        cur = next;
    }
    Err(HypError::NonConvergence {
        terms: MAX_TAYLOR_TERMS,
    })
}

/// The exponents `p1`, `q1` of the hypergeometric reduction at a given `K²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypExponents {
    pub p1: Complex64,
    pub q1: Complex64,
}

impl HypExponents {
    pub fn new(k2: f64, p: &ModelParams) -> Self {
        let k0 = p.k0();
        let s = p.s();
        let plus = principal_sqrt(Complex64::new((k0 + s) * (k0 + s) + k2, 0.0));
        let minus = principal_sqrt(Complex64::new((k0 - s) * (k0 - s) + k2, 0.0));
        Self {
            p1: (ONE + plus / k0) * 0.5,
            q1: (ONE + minus / k0) * 0.5,
        }
    }

    /// `P = (2 p1 - 1) k0`.
    pub fn quasimomentum(&self, k0: f64) -> Complex64 {
        (self.p1 * 2.0 - 1.0) * k0
    }

    /// The constant `(-1)^{q1-1/2}` on the principal branch of the logarithm.
    pub fn prefactor(&self) -> Complex64 {
        (I * PI * (self.q1 - 0.5)).exp()
    }
}

/// `P_S(K²) = √((k0+s)² + K²)`: real for `K² ≥ K0²`, positive imaginary below.
pub fn quasimomentum(k2: f64, p: &ModelParams) -> Complex64 {
    let k0s = p.k0() + p.s();
    principal_sqrt(Complex64::new(k0s * k0s + k2, 0.0))
}

/// The two Bloch solutions at one point. `plus` carries the factor
/// `e^{-iPΛ}` per period and `minus` the factor `e^{+iPΛ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochPairExact {
    pub value_plus: Complex64,
    pub value_minus: Complex64,
    pub derivative_plus: Complex64,
    pub derivative_minus: Complex64,
}

/// `z = -e^{-2ik0x}`.
fn circle_point(x: f64, k0: f64) -> Complex64 {
    -Complex64::from_polar(1.0, -2.0 * k0 * x)
}

struct FPairParams {
    ex: HypExponents,
    momentum: Complex64,
    a1: Complex64,
    b1: Complex64,
    c1: Complex64,
    a2: Complex64,
    b2: Complex64,
    c2: Complex64,
}

fn f_pair_params(k2: f64, p: &ModelParams) -> Result<FPairParams, HypError> {
    let ex = HypExponents::new(k2, p);
    let momentum = ex.quasimomentum(p.k0());
    let m = momentum / p.k0();
    if m.im.abs() < 1e-9 && m.re >= -1e-9 && (m.re - m.re.round()).abs() < 1e-9 {
        return Err(HypError::DegeneratePair { k2 });
    }
    let (p1, q1) = (ex.p1, ex.q1);
    Ok(FPairParams {
        ex,
        momentum,
        a1: p1 + q1 - 1.0,
        b1: p1 - q1,
        c1: p1 * 2.0,
        a2: q1 - p1,
        b2: ONE - p1 - q1,
        c2: 2.0 - p1 * 2.0,
    })
}

/// Values of `f_{c,1}`, `f_{c,2}` (no derivatives, so also valid at the poles).
pub fn exact_f_values(x: f64, k2: f64, p: &ModelParams) -> Result<(Complex64, Complex64), HypError> {
    let fp = f_pair_params(k2, p)?;
    let z = circle_point(x, p.k0());
    let pref = fp.ex.prefactor();
    let phase = (-I * fp.momentum * x).exp();
    let f1 = gauss_2f1(fp.a1, fp.b1, fp.c1, z)?;
    let f2 = gauss_2f1(fp.a2, fp.b2, fp.c2, z)?;
    Ok((pref * phase * f1, pref / phase * f2))
}

/// `f_{c,1}`, `f_{c,2}` and their x-derivatives.
pub fn exact_f_solutions(x: f64, k2: f64, p: &ModelParams) -> Result<BlochPairExact, HypError> {
    let fp = f_pair_params(k2, p)?;
    let k0 = p.k0();
    let z = circle_point(x, k0);
    let dz_dx = -2.0 * I * k0 * z;
    let pref = fp.ex.prefactor();
    let phase = (-I * fp.momentum * x).exp();
    let (h1, dh1) = gauss_2f1_with_derivative(fp.a1, fp.b1, fp.c1, z)?;
    let (h2, dh2) = gauss_2f1_with_derivative(fp.a2, fp.b2, fp.c2, z)?;
    let ip = I * fp.momentum;
    Ok(BlochPairExact {
        value_plus: pref * phase * h1,
        value_minus: pref / phase * h2,
        derivative_plus: pref * phase * (-ip * h1 + dh1 * dz_dx),
        derivative_minus: pref / phase * (ip * h2 + dh2 * dz_dx),
    })
}

/// `g_{c,1}`, `g_{c,2}` from their closed two-term hypergeometric forms, plus
/// derivatives from `g' = -Φ1 g - K² f`.
pub fn exact_g_solutions(x: f64, k2: f64, p: &ModelParams) -> Result<BlochPairExact, HypError> {
    let phi = superpotential_phi1(x, p)?;
    let fp = f_pair_params(k2, p)?;
    let k0 = p.k0();
    let s = p.coupling();
    let (p1, q1) = (fp.ex.p1, fp.ex.q1);
    let z = circle_point(x, k0);
    let e2 = Complex64::from_polar(1.0, -2.0 * k0 * x);
    let tan_term = Complex64::new(k0 * (k0 * x).tan(), 0.0) - s;
    let pref = fp.ex.prefactor();
    let phase = (-I * fp.momentum * x).exp();
    let ip = I * fp.momentum;
    let shared = (p1 + q1 - 1.0) * (p1 - q1);

    let f1 = gauss_2f1(fp.a1, fp.b1, fp.c1, z)?;
    let f1_up = gauss_2f1(fp.a1 + 1.0, fp.b1 + 1.0, fp.c1 + 1.0, z)?;
    let g1 = pref * phase * ((tan_term - ip) * f1 + shared / p1 * I * k0 * e2 * f1_up);

    let f2 = gauss_2f1(fp.a2, fp.b2, fp.c2, z)?;
    let f2_up = gauss_2f1(fp.a2 + 1.0, fp.b2 + 1.0, fp.c2 + 1.0, z)?;
    let g2 = pref / phase * ((tan_term + ip) * f2 + shared / (ONE - p1) * I * k0 * e2 * f2_up);

    let fv1 = pref * phase * f1;
    let fv2 = pref / phase * f2;
    Ok(BlochPairExact {
        value_plus: g1,
        value_minus: g2,
        derivative_plus: -phi * g1 - fv1 * k2,
        derivative_minus: -phi * g2 - fv2 * k2,
    })
}

/// Recombines an exact pair at 0 into the normalized cell basis
/// `u1(0)=1, u1'(0)=0, u2(0)=0, u2'(0)=1`.
fn normalize_pair(at0: &BlochPairExact, plus: Complex64, minus: Complex64) -> (Complex64, Complex64) {
    let w = at0.value_plus * at0.derivative_minus - at0.derivative_plus * at0.value_minus;
    (
        (plus * at0.derivative_minus - minus * at0.derivative_plus) / w,
        (minus * at0.value_plus - plus * at0.value_minus) / w,
    )
}

/// Exact f-problem cell solutions `(f1, f2)` with the normalized initial data.
pub fn normalized_f_oracle(x: f64, k2: f64, p: &ModelParams) -> Result<(Complex64, Complex64), HypError> {
    let at0 = exact_f_solutions(0.0, k2, p)?;
    let (u, v) = exact_f_values(x, k2, p)?;
    Ok(normalize_pair(&at0, u, v))
}

/// Exact g-problem cell solutions `(g1, g2)` with the normalized initial data.
pub fn normalized_g_oracle(x: f64, k2: f64, p: &ModelParams) -> Result<(Complex64, Complex64), HypError> {
    let at0 = exact_g_solutions(0.0, k2, p)?;
    let e = exact_g_solutions(x, k2, p)?;
    Ok(normalize_pair(&at0, e.value_plus, e.value_minus))
}

fn seed_parameter(p: &ModelParams) -> Complex64 {
    principal_sqrt(Complex64::new(-p.s() / p.k0(), 0.0))
}

/// Nodeless periodic solution at `K² = K0²`:
/// `f0(x) = ₂F₁(i√(s/k0), -i√(s/k0); 1; -e^{-2ik0x})`, unimodular prefactor dropped.
pub fn f0_bandedge(x: f64, p: &ModelParams) -> Result<Complex64, HypError> {
    let a = seed_parameter(p);
    gauss_2f1(a, -a, ONE, circle_point(x, p.k0()))
}

/// `f0` and `f0'`; the derivative is log-singular at the poles and is refused there.
pub fn f0_bandedge_with_derivative(x: f64, p: &ModelParams) -> Result<(Complex64, Complex64), HypError> {
    let a = seed_parameter(p);
    let k0 = p.k0();
    let z = circle_point(x, k0);
    let (f, df) = gauss_2f1_with_derivative(a, -a, ONE, z)?;
    Ok((f, df * (-2.0 * I * k0 * z)))
}

/// The single Bloch solution at the `n`-th band edge of the given parity.
///
/// Periodic edges (`P = 2n k0`) use `q1 = 1/2 + √(n² - s/k0)`, antiperiodic
/// ones (`P = (2n+1) k0`) use `q1 = 1/2 + √((n+1/2)² - s/k0)`.
pub fn bandedge_exact_solutions(n: u32, parity: Parity, x: f64, p: &ModelParams) -> Result<Complex64, HypError> {
    let k0 = p.k0();
    let nf = n as f64;
    let shift = -p.s() / k0;
    let z = circle_point(x, k0);
    let (q1, a, b, c, momentum) = match parity {
        Parity::Periodic => {
            let q1 = principal_sqrt(Complex64::new(nf * nf + shift, 0.0)) + 0.5;
            (
                q1,
                q1 + (nf - 0.5),
                (nf + 0.5) - q1,
                Complex64::new(1.0 + 2.0 * nf, 0.0),
                2.0 * nf * k0,
            )
        }
        Parity::Antiperiodic => {
            let h = nf + 0.5;
            let q1 = principal_sqrt(Complex64::new(h * h + shift, 0.0)) + 0.5;
            (
                q1,
                q1 + nf,
                (nf + 1.0) - q1,
                Complex64::new(2.0 * nf + 2.0, 0.0),
                (2.0 * nf + 1.0) * k0,
            )
        }
    };
    let pref = (I * PI * (q1 - 0.5)).exp();
    let phase = Complex64::from_polar(1.0, -momentum * x);
    Ok(pref * phase * gauss_2f1(a, b, c, z)?)
}
