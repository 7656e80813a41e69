//! Invariant suites run by `sau verify`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::activation::{
    leaky_relu, sau_exact_forward, sau_exact_grad_alpha, sau_exact_grad_x, sau_forward, sau_grad_alpha, sau_grad_x,
    sau_zero_centered_forward, sau_zero_centered_grad_alpha, sau_zero_centered_grad_x, SauParams,
};
use crate::mollifier::{check_mollifier, convolve_at, scale_mollifier, Mollifier, MollifierError};
use crate::quadrature::QuadratureSpec;
use crate::scalar_math::SQRT_2_OVER_PI;

pub const ALPHAS: [f64; 3] = [0.0, 0.15, 0.5];
pub const SHARPNESSES: [f64; 3] = [1.0, 5.0, 20.0];

/// x in [-5, 5], step 0.05.
pub fn standard_grid() -> Vec<f64> {
    (-100..=100).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Oracle,
    Grad,
    Convergence,
    Mollifier,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Oracle, Suite::Grad, Suite::Convergence, Suite::Mollifier];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Oracle => "oracle",
            Suite::Grad => "grad",
            Suite::Convergence => "convergence",
            Suite::Mollifier => "mollifier",
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown suite '{s}' (expected oracle, grad, convergence or mollifier)"))
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error(transparent)]
    Mollifier(#[from] MollifierError),
}

/// A point where a check exceeded its tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Failure {
    pub x: Option<f64>,
    pub alpha: Option<f64>,
    pub n: Option<f64>,
    pub error: f64,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = vec![];
        if let Some(x) = self.x {
            parts.push(format!("x={x}"));
        }
        if let Some(a) = self.alpha {
            parts.push(format!("alpha={a}"));
        }
        if let Some(n) = self.n {
            parts.push(format!("n={n}"));
        }
        if parts.is_empty() {
            write!(f, "error {:e}", self.error)
        } else {
            write!(f, "({}) error {:e}", parts.join(", "), self.error)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub points: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub failures: Vec<Failure>,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, tolerance: f64) -> Self {
        CheckOutcome {
            name: name.into(),
            points: 0,
            max_error: 0.0,
            tolerance,
            failures: vec![],
        }
    }

    fn record(&mut self, error: f64, x: Option<f64>, alpha: Option<f64>, n: Option<f64>) {
        self.points += 1;
        // NaN must not hide behind max()
        if error.is_nan() || error > self.max_error {
            self.max_error = error;
        }
        if !(error <= self.tolerance) {
            self.failures.push(Failure { x, alpha, n, error });
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<CheckOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {}: max error {:e} (tol {:e}, {} points)",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.max_error,
                c.tolerance,
                c.points
            )?;
            for fail in c.failures.iter().take(20) {
                writeln!(f, "    {fail}")?;
            }
            if c.failures.len() > 20 {
                writeln!(f, "    ... {} more", c.failures.len() - 20)?;
            }
        }
        write!(f, "{}: {}", self.suite.name(), if self.passed() { "pass" } else { "FAIL" })
    }
}

fn positive(name: &str, v: f64) -> Result<f64, VerifyError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(VerifyError::InvalidOption(format!(
            "{name} must be a positive number, got {v}"
        )))
    }
}

/// `|a - b| / max(|a|, |b|, 1)`: relative for large values, absolute below 1.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub tolerance: f64,
    pub quadrature_tolerance: f64,
    pub discrepancy_tolerance: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            tolerance: 1e-8,
            quadrature_tolerance: 1e-10,
            discrepancy_tolerance: 1e-12,
        }
    }
}

/// The exact closed form against direct quadrature of Leaky ReLU smoothed by
/// the scaled Gaussian, and the quoted form against the exact one plus its
/// known extra Gaussian term.
pub fn oracle_suite(opts: &OracleOptions) -> Result<SuiteReport, VerifyError> {
    positive("tolerance", opts.tolerance)?;
    positive("discrepancy tolerance", opts.discrepancy_tolerance)?;
    let q = QuadratureSpec::new(positive("quadrature tolerance", opts.quadrature_tolerance)?, 2000)
        .map_err(|e| VerifyError::InvalidOption(e.to_string()))?;
    let mut exact = CheckOutcome::new("exact form vs quadrature", opts.tolerance);
    let mut printed = CheckOutcome::new("quoted form minus exact form vs extra term", opts.discrepancy_tolerance);
    for alpha in ALPHAS {
        for n in SHARPNESSES {
            let p = SauParams::new(alpha, n).expect("valid grid parameters");
            let m = scale_mollifier(&Mollifier::gaussian(), n)?;
            for x in standard_grid() {
                let reference = convolve_at(|y| leaky_relu(y, alpha), &m, x, &q)?;
                let closed = sau_exact_forward(x, p);
                exact.record((closed - reference).abs(), Some(x), Some(alpha), Some(n));

                let extra = 0.5 * alpha / n * SQRT_2_OVER_PI * (-0.5 * n * n * x * x).exp();
                let gap = sau_forward(x, p) - closed;
                printed.record((gap - extra).abs(), Some(x), Some(alpha), Some(n));
            }
        }
    }
    Ok(SuiteReport {
        suite: Suite::Oracle,
        checks: vec![exact, printed],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Extra uniformly sampled points in [-1, 1] at alpha 0.15, n 20000.
    pub operating_samples: usize,
    pub seed: u64,
}

impl Default for GradOptions {
    fn default() -> Self {
        GradOptions {
            step: 1e-5,
            tolerance: 1e-6,
            operating_samples: 0,
            seed: 42,
        }
    }
}

type Form = (
    &'static str,
    fn(f64, SauParams) -> f64,
    fn(f64, SauParams) -> f64,
    fn(f64, SauParams) -> f64,
);

const FORMS: [Form; 3] = [
    ("sau", sau_forward, sau_grad_x, sau_grad_alpha),
    ("sau-exact", sau_exact_forward, sau_exact_grad_x, sau_exact_grad_alpha),
    (
        "sau-zc",
        sau_zero_centered_forward,
        sau_zero_centered_grad_x,
        sau_zero_centered_grad_alpha,
    ),
];

fn grad_point(h: f64, form: &Form, x: f64, p: SauParams, dx: &mut CheckOutcome, da: &mut CheckOutcome) {
    let (_, fwd, gx, ga) = *form;
    let a = p.alpha();
    let fd_x = (fwd(x + h, p) - fwd(x - h, p)) / (2.0 * h);
    let fd_a = (fwd(x, p.with_alpha(a + h)) - fwd(x, p.with_alpha(a - h))) / (2.0 * h);
    dx.record(relative_error(gx(x, p), fd_x), Some(x), Some(a), Some(p.n()));
    da.record(relative_error(ga(x, p), fd_a), Some(x), Some(a), Some(p.n()));
}

/// Central differences against the analytic x- and alpha-derivatives of
/// every SAU form on the standard grid.
pub fn grad_suite(opts: &GradOptions) -> Result<SuiteReport, VerifyError> {
    let h = positive("step", opts.step)?;
    positive("tolerance", opts.tolerance)?;
    let mut checks = vec![];
    for form in &FORMS {
        let mut dx = CheckOutcome::new(format!("{} d/dx", form.0), opts.tolerance);
        let mut da = CheckOutcome::new(format!("{} d/dalpha", form.0), opts.tolerance);
        for alpha in ALPHAS {
            for n in SHARPNESSES {
                let p = SauParams::new(alpha, n).expect("valid grid parameters");
                for x in standard_grid() {
                    grad_point(h, form, x, p, &mut dx, &mut da);
                }
            }
        }
        checks.push(dx);
        checks.push(da);
    }
    if opts.operating_samples > 0 {
        let p = SauParams::default();
        let mut dx = CheckOutcome::new("sau d/dx at alpha 0.15, n 20000", opts.tolerance);
        let mut da = CheckOutcome::new("sau d/dalpha at alpha 0.15, n 20000", opts.tolerance);
        for x in operating_samples(opts.operating_samples, opts.seed) {
            grad_point(h, &FORMS[0], x, p, &mut dx, &mut da);
        }
        checks.push(dx);
        checks.push(da);
    }
    Ok(SuiteReport {
        suite: Suite::Grad,
        checks,
    })
}

/// `count` points uniform on [-1, 1].
pub fn operating_samples(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceOptions {
    /// Allowed relative departure of each successive sup-norm ratio from 2.
    pub ratio_tolerance: f64,
    pub max_power: u32,
    pub origin_tolerance: f64,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions {
            ratio_tolerance: 0.01,
            max_power: 14,
            origin_tolerance: 1e-12,
        }
    }
}

/// Sup over [-5, 5] of `|sau(x) - leaky_relu(x)|`, sampled on a 1e-3 grid
/// plus a fine grid of width 10/n around the origin where the gap lives.
pub fn sup_deviation(p: SauParams) -> f64 {
    let dev = |x: f64| (sau_forward(x, p) - leaky_relu(x, p.alpha())).abs();
    let coarse = (-5000..=5000).map(|i| i as f64 * 1e-3);
    let fine = (-800..=800).map(|k| k as f64 / (80.0 * p.n())).filter(|x| x.abs() <= 5.0);
    coarse.chain(fine).map(dev).fold(0.0, f64::max)
}

/// Sup-norm distance to Leaky ReLU halves as n doubles, and the gap at the
/// origin is `sqrt(2/pi) / (2n)`.
pub fn convergence_suite(opts: &ConvergenceOptions) -> Result<SuiteReport, VerifyError> {
    positive("ratio tolerance", opts.ratio_tolerance)?;
    positive("origin tolerance", opts.origin_tolerance)?;
    let mut halving = CheckOutcome::new("sup deviation ratio per doubling of n", opts.ratio_tolerance);
    for alpha in ALPHAS {
        let mut prev: Option<f64> = None;
        for k in 0..=opts.max_power {
            let n = (1u64 << k) as f64;
            let d = sup_deviation(SauParams::new(alpha, n).expect("valid n"));
            if let Some(before) = prev {
                halving.record((before / d / 2.0 - 1.0).abs(), None, Some(alpha), Some(n));
            }
            prev = Some(d);
        }
    }
    let mut origin = CheckOutcome::new("deviation at x = 0, n = 20000", opts.origin_tolerance);
    for alpha in ALPHAS {
        let p = SauParams::new(alpha, 20000.0).expect("valid n");
        let expected = SQRT_2_OVER_PI / (2.0 * 20000.0);
        let got = sau_forward(0.0, p) - leaky_relu(0.0, alpha);
        origin.record((got - expected).abs(), Some(0.0), Some(alpha), Some(20000.0));
    }
    Ok(SuiteReport {
        suite: Suite::Convergence,
        checks: vec![halving, origin],
    })
}

/// A Gaussian with twice the mass, for exercising the failure path.
pub fn doubled_gaussian() -> Mollifier {
    let g = Mollifier::gaussian();
    Mollifier::new("doubled-gaussian", g.effective_support(), move |x| 2.0 * g.density(x)).expect("finite support")
}

/// Mollifier axioms for each candidate. The error column is `|mass - 1|`.
pub fn mollifier_suite(candidates: &[Mollifier], quadrature: &QuadratureSpec) -> SuiteReport {
    let checks = candidates
        .iter()
        .map(|m| {
            let mut c = CheckOutcome::new(format!("{} axioms", m.name()), crate::mollifier::MASS_TOLERANCE);
            match check_mollifier(m, quadrature) {
                Ok(d) => c.record((d.mass - 1.0).abs(), None, None, None),
                Err(MollifierError::Invalid { diagnostics, axiom, .. }) => {
                    c.name = format!("{} axioms ({axiom:?} violated)", m.name());
                    c.points = 1;
                    c.max_error = (diagnostics.mass - 1.0).abs();
                    c.failures.push(Failure {
                        x: None,
                        alpha: None,
                        n: None,
                        error: c.max_error,
                    });
                }
                Err(e) => {
                    c.name = format!("{} axioms ({e})", m.name());
                    c.points = 1;
                    c.max_error = f64::NAN;
                    c.failures.push(Failure {
                        x: None,
                        alpha: None,
                        n: None,
                        error: f64::NAN,
                    });
                }
            }
            c
        })
        .collect();
    SuiteReport {
        suite: Suite::Mollifier,
        checks,
    }
}
