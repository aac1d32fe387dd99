//! The parametric potential family.
//!
//! A Riccati seed `R(x) = -k0 tan(k0 x)` plus a purely imaginary coupling
//! `S = i s` gives the superpotential `Φ1 = R + S` and the SUSY-partner pair
//!
//! ```text
//! ν1,c(x) = Φ1' + Φ1² = -k0² + S² - 2 S k0 tan(k0 x)
//! ν2,c(x) = -Φ1' + Φ1² = k0² + S² - 2 S k0 tan(k0 x) + 2 k0² tan²(k0 x)
//! ```
//!
//! Both are Λ-periodic with Λ = π/k0 and have poles at Λ/2 + mΛ. With s = 0
//! the pair reduces to the uncoupled constant potential and its partner.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("x = {x} lies within the exclusion radius of the pole at {pole}")]
    Singular { x: f64, pole: f64 },
}

/// Parity of a band-edge solution over one period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    /// `f(x + Λ) = f(x)`, Hill discriminant `+2`.
    Periodic,
    /// `f(x + Λ) = -f(x)`, Hill discriminant `-2`.
    Antiperiodic,
}

impl Parity {
    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Periodic => "periodic",
            Parity::Antiperiodic => "antiperiodic",
        }
    }

    /// Value of the Hill discriminant at an edge of this parity.
    pub fn discriminant(self) -> f64 {
        match self {
            Parity::Periodic => 2.0,
            Parity::Antiperiodic => -2.0,
        }
    }
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Poles of `tan(k0 x)`: `cell_pole + mΛ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularSet {
    cell_pole: f64,
    period: f64,
    exclusion_radius: f64,
}

impl SingularSet {
    pub fn cell_pole(&self) -> f64 {
        self.cell_pole
    }

    pub fn exclusion_radius(&self) -> f64 {
        self.exclusion_radius
    }

    pub fn nearest_pole(&self, x: f64) -> f64 {
        let m = ((x - self.cell_pole) / self.period).round();
        self.cell_pole + m * self.period
    }

    pub fn distance_to_pole(&self, x: f64) -> f64 {
        (x - self.nearest_pole(x)).abs()
    }

    pub fn is_excluded(&self, x: f64) -> bool {
        self.distance_to_pole(x) < self.exclusion_radius
    }

    pub fn check(&self, x: f64) -> Result<(), ModelError> {
        let pole = self.nearest_pole(x);
        if (x - pole).abs() < self.exclusion_radius {
            Err(ModelError::Singular { x, pole })
        } else {
            Ok(())
        }
    }
}

/// Constants of the potential family.
///
/// The coupling is stored as the real `s` of `S = i s`; only purely imaginary
/// couplings give a real spectrum, so general complex `S` is not representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    k0: f64,
    s: f64,
    period: f64,
    seed_energy: f64,
    singular: SingularSet,
}

/// Relative size of the pole exclusion neighbourhood, in units of Λ.
pub const DEFAULT_EXCLUSION_FRACTION: f64 = 1e-6;

impl ModelParams {
    pub fn new(k0: f64, s: f64) -> Result<Self, ModelError> {
        if !(k0.is_finite() && k0 > 0.0) {
            return Err(ModelError::InvalidParams(format!(
                "k0 must be positive and finite, got {k0}"
            )));
        }
        if !s.is_finite() {
            return Err(ModelError::InvalidParams(format!("s must be finite, got {s}")));
        }
        let period = PI / k0;
        Ok(Self {
            k0,
            s,
            period,
            seed_energy: -(k0 + s) * (k0 + s),
            singular: SingularSet {
                cell_pole: 0.5 * period,
                period,
                exclusion_radius: DEFAULT_EXCLUSION_FRACTION * period,
            },
        })
    }

    pub fn with_exclusion_radius(mut self, radius: f64) -> Result<Self, ModelError> {
        if !(radius.is_finite() && radius > 0.0 && radius < 0.5 * self.period) {
            return Err(ModelError::InvalidParams(format!(
                "exclusion radius must lie in (0, Λ/2), got {radius}"
            )));
        }
        self.singular.exclusion_radius = radius;
        Ok(self)
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `S = i s`.
    pub fn coupling(&self) -> Complex64 {
        Complex64::new(0.0, self.s)
    }

    /// Cell period `Λ = π / k0`.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// `K0² = -(k0 + s)²`: the lowest periodic band edge and SPPS expansion centre.
    pub fn seed_energy(&self) -> f64 {
        self.seed_energy
    }

    pub fn singular_set(&self) -> &SingularSet {
        &self.singular
    }

    /// Analytic band-edge location: `(2n k0)² - (k0+s)²` for periodic edges,
    /// `((2n+1) k0)² - (k0+s)²` for antiperiodic ones.
    pub fn analytic_band_edge(&self, n: u32, parity: Parity) -> f64 {
        let m = match parity {
            Parity::Periodic => 2.0 * n as f64,
            Parity::Antiperiodic => 2.0 * n as f64 + 1.0,
        };
        let p = m * self.k0;
        p * p + self.seed_energy
    }
}

fn tan_k0x(x: f64, p: &ModelParams) -> Result<f64, ModelError> {
    p.singular.check(x)?;
    Ok((p.k0 * x).tan())
}

/// `Φ1(x) = -k0 tan(k0 x) + i s`.
pub fn superpotential_phi1(x: f64, p: &ModelParams) -> Result<Complex64, ModelError> {
    let t = tan_k0x(x, p)?;
    Ok(Complex64::new(-p.k0 * t, p.s))
}

/// `Φ1'(x) = -k0² sec²(k0 x)`.
pub fn superpotential_derivative(x: f64, p: &ModelParams) -> Result<Complex64, ModelError> {
    let t = tan_k0x(x, p)?;
    Ok(Complex64::new(-p.k0 * p.k0 * (1.0 + t * t), 0.0))
}

/// Residual of `Φ' - 2SΦ + Φ² + k0² + S² = 0` at `Φ = Φ1`.
pub fn riccati_residual(x: f64, p: &ModelParams) -> Result<Complex64, ModelError> {
    let phi = superpotential_phi1(x, p)?;
    let dphi = superpotential_derivative(x, p)?;
    let s = p.coupling();
    Ok(dphi - s * phi * 2.0 + phi * phi + p.k0 * p.k0 + s * s)
}

pub fn potential_nu1c(x: f64, p: &ModelParams) -> Result<Complex64, ModelError> {
    let t = tan_k0x(x, p)?;
    let s = p.coupling();
    Ok(s * s - p.k0 * p.k0 - s * (2.0 * p.k0 * t))
}

pub fn potential_nu2c(x: f64, p: &ModelParams) -> Result<Complex64, ModelError> {
    let t = tan_k0x(x, p)?;
    let s = p.coupling();
    let k2 = p.k0 * p.k0;
    Ok(s * s + k2 - s * (2.0 * p.k0 * t) + 2.0 * k2 * t * t)
}

const H2_PANELS: usize = 4096;

/// The two `K² = 0` solutions of the f-equation:
/// `h1 = e^{Sx} cos(k0 x)` and `h2 = h1 ∫₀^x e^{-2Sξ} sec²(k0 ξ) dξ`.
///
/// The integral is only defined while the path `[0, x]` stays clear of the
/// poles, i.e. for `|x| < Λ/2`.
pub fn closed_form_k2_zero(x: f64, p: &ModelParams) -> Result<(Complex64, Complex64), ModelError> {
    let pole = if x >= 0.0 {
        p.singular.cell_pole
    } else {
        -p.singular.cell_pole
    };
    if (pole - x).abs() < p.singular.exclusion_radius || x.abs() >= p.singular.cell_pole {
        return Err(ModelError::Singular { x, pole });
    }
    let s = p.coupling();
    let h1 = (s * x).exp() * (p.k0 * x).cos();
    if x == 0.0 {
        return Ok((h1, Complex64::new(0.0, 0.0)));
    }
    // Integrate by parts to move the double pole into a closed-form boundary term:
    // ∫ e^{-2Sξ} sec² = e^{-2Sξ} tan(k0ξ)/k0 + (2S/k0) ∫ e^{-2Sξ} tan(k0ξ) dξ.
    let integrand = |xi: f64| (-s * 2.0 * xi).exp() * (p.k0 * xi).tan();
    let h = x / H2_PANELS as f64;
    let mut acc = integrand(0.0) + integrand(x);
    for i in 1..H2_PANELS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += integrand(i as f64 * h) * w;
    }
    let smooth = acc * (h / 3.0);
    let integral = (-s * 2.0 * x).exp() * ((p.k0 * x).tan() / p.k0) + s * (2.0 / p.k0) * smooth;
    Ok((h1, h1 * integral))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(k0: f64, s: f64) -> ModelParams {
        ModelParams::new(k0, s).unwrap()
    }

    #[test]
    fn derived_constants() {
        let p = params(2.0, 0.7);
        assert_eq!(p.period() * p.k0(), PI);
        assert_eq!(p.seed_energy(), -(2.7f64 * 2.7));
        assert_eq!(p.singular_set().cell_pole(), PI / 4.0);
        assert!((p.singular_set().exclusion_radius() - 1e-6 * PI / 2.0).abs() < 1e-20);
        assert!(ModelParams::new(0.0, 0.1).is_err());
        assert!(ModelParams::new(-1.0, 0.1).is_err());
        assert!(ModelParams::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn poles_repeat_every_period() {
        let p = params(1.0, 0.1);
        let sing = p.singular_set();
        assert_eq!(sing.nearest_pole(0.1), PI / 2.0);
        assert!((sing.nearest_pole(5.0) - 1.5 * PI).abs() < 1e-15);
        assert!((sing.nearest_pole(-1.0) + PI / 2.0).abs() < 1e-15);
        assert!(sing.is_excluded(PI / 2.0 + 1e-7));
        assert!(!sing.is_excluded(PI / 2.0 + 1e-5));
    }

    #[test]
    fn superpotential_examples() {
        let p = params(1.0, 0.1);
        assert_eq!(superpotential_phi1(0.0, &p).unwrap(), Complex64::new(0.0, 0.1));
        let v = superpotential_phi1(PI / 4.0, &p).unwrap();
        assert!((v - Complex64::new(-1.0, 0.1)).norm() < 1e-15);
        match superpotential_phi1(PI / 2.0, &p) {
            Err(ModelError::Singular { pole, .. }) => assert_eq!(pole, PI / 2.0),
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn riccati_residual_vanishes() {
        assert!(riccati_residual(0.3, &params(1.0, 0.1)).unwrap().norm() <= 1e-13);
        assert!(riccati_residual(1.0, &params(2.0, 0.7)).unwrap().norm() <= 1e-13);
        // Case I: R = -k0 tan(k0 x) solves R' + R² + k0² = 0.
        let p = params(1.0, 0.0);
        let r = superpotential_phi1(0.5, &p).unwrap();
        let dr = superpotential_derivative(0.5, &p).unwrap();
        assert!((dr + r * r + 1.0).norm() <= 1e-13);
    }

    #[test]
    fn potential_examples() {
        let p = params(1.0, 0.1);
        assert!((potential_nu1c(0.0, &p).unwrap() - Complex64::new(-1.01, 0.0)).norm() < 1e-15);
        assert!((potential_nu2c(0.0, &p).unwrap() - Complex64::new(0.99, 0.0)).norm() < 1e-15);
        let free = params(1.3, 0.0);
        for &x in &[0.0, 0.2, 0.9, 2.0] {
            assert_eq!(potential_nu1c(x, &free).unwrap(), Complex64::new(-1.3 * 1.3, 0.0));
            let t = (1.3 * x).tan();
            let nu2 = potential_nu2c(x, &free).unwrap();
            assert!((nu2.re - 1.69 * (1.0 + 2.0 * t * t)).abs() < 1e-12 && nu2.im == 0.0);
        }
        assert!(potential_nu2c(PI / 2.6, &free).is_err());
    }

    #[test]
    fn closed_form_initial_values() {
        let p = params(1.0, 0.1);
        let (h1, h2) = closed_form_k2_zero(0.0, &p).unwrap();
        assert_eq!(h1, Complex64::new(1.0, 0.0));
        assert_eq!(h2, Complex64::new(0.0, 0.0));
        assert!(closed_form_k2_zero(2.0, &p).is_err());
        assert!(closed_form_k2_zero(-2.0, &p).is_err());
    }

    #[test]
    fn closed_form_solves_the_zero_energy_equation() {
        // ODE residual oracle with a central second difference.
        let p = params(1.0, 0.1);
        let x = 0.4;
        let h = 1e-4;
        let nu = potential_nu1c(x, &p).unwrap();
        let at = |x| closed_form_k2_zero(x, &p).unwrap();
        let (l, m, r) = (at(x - h), at(x), at(x + h));
        let d2_h1 = (l.0 - m.0 * 2.0 + r.0) / (h * h);
        let d2_h2 = (l.1 - m.1 * 2.0 + r.1) / (h * h);
        assert!((-d2_h1 + nu * m.0).norm() <= 1e-6);
        assert!((-d2_h2 + nu * m.1).norm() <= 1e-6);
        // h2 is independent of h1: unit Wronskian at the origin.
        let d_h2 = (at(h).1 - at(-h).1) / (2.0 * h);
        assert!((d_h2 - 1.0).norm() < 1e-7);
    }

    #[test]
    fn analytic_edges() {
        let p = params(1.0, 0.1);
        let expect = [
            (0, Parity::Periodic, -1.21),
            (0, Parity::Antiperiodic, -0.21),
            (1, Parity::Periodic, 2.79),
            (1, Parity::Antiperiodic, 7.79),
        ];
        for (n, parity, k2) in expect {
            assert!((p.analytic_band_edge(n, parity) - k2).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn superpotential_is_periodic(x in -3.0f64..3.0, k0 in 0.3f64..3.0, s in -2.0f64..2.0) {
            let p = params(k0, s);
            prop_assume!(p.singular_set().distance_to_pole(x) > 1e-3);
            let a = superpotential_phi1(x, &p).unwrap();
            let b = superpotential_phi1(x + p.period(), &p).unwrap();
            prop_assert!((a - b).norm() <= 1e-9 * (1.0 + a.norm() * a.norm()));
        }

        #[test]
        fn susy_pairing_holds_pointwise(x in -3.0f64..3.0, k0 in 0.3f64..3.0, s in -2.0f64..2.0) {
            let p = params(k0, s);
            prop_assume!(p.singular_set().distance_to_pole(x) > 1e-2);
            let phi = superpotential_phi1(x, &p).unwrap();
            let dphi = superpotential_derivative(x, &p).unwrap();
            let nu1 = potential_nu1c(x, &p).unwrap();
            let nu2 = potential_nu2c(x, &p).unwrap();
            let scale = 1.0 + nu2.norm();
            prop_assert!((dphi + phi * phi - nu1).norm() <= 1e-12 * scale);
            prop_assert!((-dphi + phi * phi - nu2).norm() <= 1e-12 * scale);
            let t = (k0 * x).tan();
            prop_assert!((nu2 - nu1 - 2.0 * k0 * k0 * (1.0 + t * t)).norm() <= 1e-12 * scale);
        }

        #[test]
        fn zero_coupling_is_case_one(x in -3.0f64..3.0, k0 in 0.3f64..3.0) {
            let p = params(k0, 0.0);
            prop_assume!(p.singular_set().distance_to_pole(x) > 1e-2);
            let t = (k0 * x).tan();
            prop_assert_eq!(potential_nu1c(x, &p).unwrap(), Complex64::new(-k0 * k0, 0.0));
            let nu2 = potential_nu2c(x, &p).unwrap();
            prop_assert!((nu2.re - k0 * k0 * (1.0 + 2.0 * t * t)).abs() <= 1e-12 * (1.0 + nu2.re.abs()));
        }
    }
}
