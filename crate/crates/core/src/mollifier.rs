//! Smoothing by convolution with an approximate identity.
//!
//! A [`Mollifier`] is a non-negative unit-mass density with a finite
//! effective support `[-R, R]`. Scaling by `n` gives `phi_n(x) = n phi(n x)`
//! supported on `[-R/n, R/n]`, and `(f * phi_n)(x)` is evaluated here by
//! adaptive quadrature. This is the numerical ground truth the closed-form
//! SAU expressions are checked against.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::quadrature::{integrate, integrate_upper_tail, QuadratureError, QuadratureSpec};
use crate::scalar_math::gaussian_pdf;

/// Radius outside which the standard Gaussian carries < 3e-19 of its mass.
pub const GAUSSIAN_EFFECTIVE_SUPPORT: f64 = 9.0;

/// `1 / integral_{-1}^{1} exp(-1/(1 - x^2)) dx`.
pub const BUMP_NORMALIZATION: f64 = 2.252_283_621_043_581_010_499_781_255_559_830_730_074;

pub const MASS_TOLERANCE: f64 = 1e-10;
pub const SUPPORT_LEAK_TOLERANCE: f64 = 1e-12;

const DENSITY_SAMPLES: usize = 4001;

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MollifierAxiom {
    UnitMass,
    NonNegative,
    EffectiveSupport,
}

impl fmt::Display for MollifierAxiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MollifierAxiom::UnitMass => "unit mass",
            MollifierAxiom::NonNegative => "non-negative density",
            MollifierAxiom::EffectiveSupport => "effective support",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MollifierError {
    #[error("scale n must be finite and > 0, got {0}")]
    InvalidScale(f64),
    #[error("effective support must be finite and > 0, got {0}")]
    InvalidSupport(f64),
    #[error("mollifier `{name}` violates {axiom}: {diagnostics}")]
    Invalid {
        name: String,
        axiom: MollifierAxiom,
        diagnostics: MollifierDiagnostics,
    },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Measured quantities behind the mollifier axioms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierDiagnostics {
    /// Integral of the density over `[-R, R]`.
    pub mass: f64,
    /// Smallest sampled density value on `[-2R, 2R]`.
    pub min_density: f64,
    /// Mass outside `[-R, R]`.
    pub support_leak: f64,
}

impl fmt::Display for MollifierDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mass {:.15}, min density {:e}, support leak {:e}",
            self.mass, self.min_density, self.support_leak
        )
    }
}

#[derive(Clone)]
pub struct Mollifier {
    name: String,
    effective_support: f64,
    density: DensityFn,
}

impl fmt::Debug for Mollifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mollifier")
            .field("name", &self.name)
            .field("effective_support", &self.effective_support)
            .finish_non_exhaustive()
    }
}

impl Mollifier {
    pub fn new(
        name: impl Into<String>,
        effective_support: f64,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, MollifierError> {
        if !(effective_support.is_finite() && effective_support > 0.0) {
            return Err(MollifierError::InvalidSupport(effective_support));
        }
        Ok(Mollifier {
            name: name.into(),
            effective_support,
            density: Arc::new(density),
        })
    }

    /// Standard normal density, truncated to `[-9, 9]` for integration.
    ///
    /// Not compactly supported; the mass beyond the effective support is
    /// reported by [`check_mollifier`].
    pub fn gaussian() -> Self {
        Mollifier {
            name: "gaussian".into(),
            effective_support: GAUSSIAN_EFFECTIVE_SUPPORT,
            density: Arc::new(gaussian_pdf),
        }
    }

    /// The classic compactly supported bump `c exp(-1/(1 - x^2))` on `(-1, 1)`.
    pub fn bump() -> Self {
        Mollifier {
            name: "bump".into(),
            effective_support: 1.0,
            density: Arc::new(bump_density),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn effective_support(&self) -> f64 {
        self.effective_support
    }

    #[inline]
    pub fn density(&self, x: f64) -> f64 {
        (self.density)(x)
    }
}

fn bump_density(x: f64) -> f64 {
    let s = 1.0 - x * x;
    if s <= 0.0 {
        0.0
    } else {
        BUMP_NORMALIZATION * (-1.0 / s).exp()
    }
}

/// `x -> n * m(n x)`, support `R / n`.
pub fn scale_mollifier(m: &Mollifier, n: f64) -> Result<Mollifier, MollifierError> {
    if !(n.is_finite() && n > 0.0) {
        return Err(MollifierError::InvalidScale(n));
    }
    let inner = Arc::clone(&m.density);
    Ok(Mollifier {
        name: format!("{}[n={n}]", m.name),
        effective_support: m.effective_support / n,
        density: Arc::new(move |x| n * inner(n * x)),
    })
}

/// `integral f(x - y) m(y) dy` over the effective support of `m`.
///
/// The window is split at `y = x`, where `f(x - y)` has its kink when `f` is
/// kinked at the origin (every activation here is).
pub fn convolve_at<F: Fn(f64) -> f64>(f: F, m: &Mollifier, x: f64, q: &QuadratureSpec) -> Result<f64, MollifierError> {
    let r = m.effective_support;
    let integral = integrate(|y| f(x - y) * m.density(y), -r, r, &[x], q)?;
    Ok(integral.value)
}

/// `f * m_n` as a callable, where `m_n` is `m` scaled by `n`.
#[derive(Debug, Clone)]
pub struct Smoothed<F> {
    f: F,
    mollifier: Mollifier,
    quadrature: QuadratureSpec,
}

impl<F: Fn(f64) -> f64> Smoothed<F> {
    pub fn eval(&self, x: f64) -> Result<f64, MollifierError> {
        convolve_at(&self.f, &self.mollifier, x, &self.quadrature)
    }

    pub fn mollifier(&self) -> &Mollifier {
        &self.mollifier
    }
}

pub fn smoothed_function<F: Fn(f64) -> f64>(
    f: F,
    m: &Mollifier,
    n: f64,
    q: &QuadratureSpec,
) -> Result<Smoothed<F>, MollifierError> {
    Ok(Smoothed {
        f,
        mollifier: scale_mollifier(m, n)?,
        quadrature: *q,
    })
}

/// Measures mass, sign and support leakage and checks them against
/// [`MASS_TOLERANCE`] and [`SUPPORT_LEAK_TOLERANCE`].
pub fn check_mollifier(m: &Mollifier, q: &QuadratureSpec) -> Result<MollifierDiagnostics, MollifierError> {
    let r = m.effective_support;
    let mass = integrate(|y| m.density(y), -r, r, &[0.0], q)?.value;
    let upper = integrate_upper_tail(|y| m.density(y), r, q)?.value;
    let lower = integrate_upper_tail(|y| m.density(-y), r, q)?.value;
    let min_density = (0..DENSITY_SAMPLES)
        .map(|i| -2.0 * r + 4.0 * r * i as f64 / (DENSITY_SAMPLES - 1) as f64)
        .map(|y| m.density(y))
        .fold(f64::INFINITY, f64::min);
    let diagnostics = MollifierDiagnostics {
        mass,
        min_density,
        support_leak: upper + lower,
    };

    let violated = if !(min_density >= 0.0) {
        Some(MollifierAxiom::NonNegative)
    } else if !((mass - 1.0).abs() <= MASS_TOLERANCE) {
        Some(MollifierAxiom::UnitMass)
    } else if !(diagnostics.support_leak.abs() < SUPPORT_LEAK_TOLERANCE) {
        Some(MollifierAxiom::EffectiveSupport)
    } else {
        None
    };
    match violated {
        Some(axiom) => Err(MollifierError::Invalid {
            name: m.name.clone(),
            axiom,
            diagnostics,
        }),
        None => Ok(diagnostics),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::{leaky_relu, sau_exact_forward, SauParams};
    use crate::scalar_math::SQRT_2_OVER_PI;

    fn q() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn scale_examples() {
        let g = Mollifier::gaussian();
        let same = scale_mollifier(&g, 1.0).unwrap();
        for i in -50..=50 {
            let x = f64::from(i) * 0.1;
            assert_eq!(same.density(x), g.density(x));
        }
        let g2 = scale_mollifier(&g, 2.0).unwrap();
        assert!((g2.density(0.0) - 0.797_884_6).abs() < 1e-7);
        assert_eq!(g2.effective_support(), 4.5);
        let b4 = scale_mollifier(&Mollifier::bump(), 4.0).unwrap();
        assert_eq!(b4.effective_support(), 0.25);
        assert!(matches!(scale_mollifier(&g, 0.0), Err(MollifierError::InvalidScale(_))));
        assert!(matches!(scale_mollifier(&g, -1.0), Err(MollifierError::InvalidScale(_))));
    }

    #[test]
    fn scaling_preserves_mass() {
        for m in [Mollifier::gaussian(), Mollifier::bump()] {
            for n in [0.5, 3.0, 20.0, 1000.0] {
                let d = check_mollifier(&scale_mollifier(&m, n).unwrap(), &q()).unwrap();
                assert!((d.mass - 1.0).abs() <= MASS_TOLERANCE);
            }
        }
    }

    #[test]
    fn convolve_examples() {
        for m in [Mollifier::gaussian(), Mollifier::bump()] {
            for x in [-3.0, 0.0, 0.4] {
                assert!((convolve_at(|_| 1.0, &m, x, &q()).unwrap() - 1.0).abs() < 1e-10);
            }
        }
        let g = Mollifier::gaussian();
        assert!((convolve_at(|t| t, &g, 0.7, &q()).unwrap() - 0.7).abs() < 1e-10);
        let abs = convolve_at(f64::abs, &g, 0.0, &q()).unwrap();
        assert!((abs - SQRT_2_OVER_PI).abs() < 1e-10);
    }

    #[test]
    fn smoothed_examples() {
        let g = Mollifier::gaussian();
        let lrelu = smoothed_function(|t| leaky_relu(t, 0.15), &g, 1.0, &q()).unwrap();
        let closed = sau_exact_forward(0.0, SauParams::new(0.15, 1.0).unwrap());
        assert!((lrelu.eval(0.0).unwrap() - closed).abs() < 1e-10);
        for n in [1.0, 7.0, 40.0] {
            let identity = smoothed_function(|t| leaky_relu(t, 1.0), &g, n, &q()).unwrap();
            assert!((identity.eval(-2.0).unwrap() + 2.0).abs() < 1e-10);
        }
        let relu = smoothed_function(|t: f64| t.max(0.0), &Mollifier::bump(), 10.0, &q()).unwrap();
        assert!((relu.eval(1.0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn built_ins_pass_the_axioms() {
        let g = check_mollifier(&Mollifier::gaussian(), &q()).unwrap();
        assert!((g.mass - 1.0).abs() <= 1e-10);
        assert!(g.support_leak < 1e-18);
        assert!(g.min_density >= 0.0);
        let b = check_mollifier(&Mollifier::bump(), &q()).unwrap();
        assert!((b.mass - 1.0).abs() <= 1e-10);
        assert_eq!(b.support_leak, 0.0);
    }

    #[test]
    fn broken_densities_are_rejected() {
        let doubled = Mollifier::new("doubled", 9.0, |x| 2.0 * gaussian_pdf(x)).unwrap();
        match check_mollifier(&doubled, &q()) {
            Err(MollifierError::Invalid { axiom, diagnostics, .. }) => {
                assert_eq!(axiom, MollifierAxiom::UnitMass);
                assert!((diagnostics.mass - 2.0).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
        let signed = Mollifier::new("signed", 1.0, |x: f64| if x.abs() < 1.0 { 0.5 + x } else { 0.0 }).unwrap();
        assert!(matches!(
            check_mollifier(&signed, &q()),
            Err(MollifierError::Invalid {
                axiom: MollifierAxiom::NonNegative,
                ..
            })
        ));
        let leaky = Mollifier::new("narrow-window", 1.0, gaussian_pdf).unwrap();
        assert!(matches!(
            check_mollifier(&leaky, &q()),
            Err(MollifierError::Invalid {
                axiom: MollifierAxiom::UnitMass,
                ..
            })
        ));
        assert!(Mollifier::new("zero", 0.0, gaussian_pdf).is_err());
    }

    #[test]
    fn commutativity_probe() {
        // bump * gaussian evaluated both ways round
        let g = Mollifier::gaussian();
        let b = Mollifier::bump();
        for i in 0..20 {
            let x = -3.0 + 0.3 * f64::from(i) + 0.01;
            let one = convolve_at(|t| b.density(t), &g, x, &q()).unwrap();
            let two = convolve_at(gaussian_pdf, &b, x, &q()).unwrap();
            assert!((one - two).abs() <= 1e-10, "x {x}: {one} vs {two}");
        }
    }

    #[test]
    fn convergence_to_leaky_relu() {
        let g = Mollifier::gaussian();
        for x in [-1.0, -0.1, 0.0, 0.1, 1.0] {
            let mut prev = f64::INFINITY;
            let mut last = 0.0;
            for k in 0..=8 {
                let n = f64::from(1u32 << k);
                let s = smoothed_function(|t| leaky_relu(t, 0.15), &g, n, &q()).unwrap();
                let dev = (s.eval(x).unwrap() - leaky_relu(x, 0.15)).abs();
                assert!(dev <= prev + 2e-10, "x {x} n {n}: {dev} > {prev}");
                prev = dev;
                last = dev;
            }
            assert!(last < 1e-2);
        }
    }

    #[test]
    fn second_difference_stabilises_for_smoothed_function() {
        let g = Mollifier::gaussian();
        let s = smoothed_function(|t| leaky_relu(t, 0.15), &g, 4.0, &QuadratureSpec::new(1e-13, 2000).unwrap()).unwrap();
        let second = |h: f64| (s.eval(h).unwrap() - 2.0 * s.eval(0.0).unwrap() + s.eval(-h).unwrap()) / (h * h);
        let raw = |h: f64| (leaky_relu(h, 0.15) - 2.0 * leaky_relu(0.0, 0.15) + leaky_relu(-h, 0.15)) / (h * h);
        let hs = [0.1, 0.05, 0.025, 0.0125];
        let smooth: Vec<f64> = hs.iter().map(|&h| second(h)).collect();
        let limit = 0.425 * 4.0 * SQRT_2_OVER_PI;
        for w in smooth.windows(2) {
            assert!((w[1] - limit).abs() < (w[0] - limit).abs());
        }
        assert!((smooth[3] - limit).abs() < 1e-3);
        for &h in &hs {
            assert!((raw(h) * h - 0.85).abs() < 1e-12);
        }
    }
}
