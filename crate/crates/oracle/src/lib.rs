//! Extended-precision reference values for tests.
//!
//! Everything here is evaluated in double-double arithmetic (an unevaluated sum
//! of two `f64`s, roughly 32 significant digits) and is deliberately written
//! without sharing any code path with `sau-core`. It is slow and only meant to
//! judge the production kernels.

mod dd;

pub use dd::Dd;

const TWO_OVER_SQRT_PI: Dd = Dd::from_parts(std::f64::consts::FRAC_2_SQRT_PI, 1.533545961316588e-17);
const SQRT_2_OVER_PI: Dd = Dd::from_parts(0.7978845608028654, -4.98465440455546e-17);
const FRAC_1_SQRT_2: Dd = Dd::from_parts(std::f64::consts::FRAC_1_SQRT_2, -4.833646656726457e-17);

/// `erf(z)` from the Maclaurin series
/// `(2/sqrt(pi)) * sum (-1)^k z^(2k+1) / (k! (2k+1))`.
///
/// Terms peak around `e^(z^2)`, so cancellation costs about `z^2 / ln 10`
/// digits. At `|z| = 6` that still leaves ~18 correct digits.
pub fn erf_series(z: Dd) -> Dd {
    let z2 = z * z;
    let mut power = z; // z^(2k+1) / k!, signed
    let mut sum = z;
    let mut k = 0u32;
    loop {
        k += 1;
        power = -(power * z2) / f64::from(k);
        let term = power / f64::from(2 * k + 1);
        sum = sum + term;
        if (term.hi == 0.0 || term.hi.abs() < 1e-36 * sum.hi.abs()) && f64::from(k) > z2.hi {
            break;
        }
        assert!(k < 10_000, "erf series failed to converge for z = {}", z.hi);
    }
    TWO_OVER_SQRT_PI * sum
}

/// `erfc(z)` for `z >= 2` from the Laplace continued fraction
/// `e^(-z^2)/sqrt(pi) * 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))`,
/// evaluated bottom-up with a fixed depth.
pub fn erfc_continued_fraction(z: Dd) -> Dd {
    assert!(z.hi >= 2.0, "continued fraction is only used for z >= 2");
    let depth = 600u32;
    let mut tail = Dd::from(0.0);
    for k in (1..=depth).rev() {
        tail = Dd::from(f64::from(k) * 0.5) / (z + tail);
    }
    let cf = Dd::from(1.0) / (z + tail);
    exp(-(z * z)) * cf * TWO_OVER_SQRT_PI * Dd::from(0.5)
}

/// `erf(z)` at any finite `z`: series for `|z| <= 5`, continued fraction beyond.
pub fn erf(z: Dd) -> Dd {
    if z.hi.abs() <= 5.0 {
        erf_series(z)
    } else if z.hi > 0.0 {
        Dd::from(1.0) - erfc_continued_fraction(z)
    } else {
        erfc_continued_fraction(-z) - Dd::from(1.0)
    }
}

/// `e^a` by Taylor series after halving the argument until `|a| < 2^-10`,
/// then squaring back.
pub fn exp(a: Dd) -> Dd {
    if a.hi < -745.0 {
        return Dd::from(0.0);
    }
    let mut halvings = 0;
    let mut r = a;
    while r.hi.abs() > 1.0 / 1024.0 {
        r = r * 0.5;
        halvings += 1;
    }
    let mut term = Dd::from(1.0);
    let mut sum = Dd::from(1.0);
    for k in 1..40 {
        term = term * r / f64::from(k);
        sum = sum + term;
        if term.hi.abs() < 1e-36 {
            break;
        }
    }
    for _ in 0..halvings {
        sum = sum * sum;
    }
    sum
}

fn gaussian_term(x: Dd, n: Dd) -> Dd {
    // (1/n) sqrt(2/pi) e^(-n^2 x^2 / 2)
    let t = n * x;
    SQRT_2_OVER_PI * exp(-(t * t) * 0.5) / n
}

fn erf_scaled(x: Dd, n: Dd) -> Dd {
    erf(n * x * FRAC_1_SQRT_2)
}

/// Gaussian-smoothed Leaky ReLU with the Gaussian term weighted by `1/2`.
pub fn sau_quoted(x: f64, alpha: f64, n: f64) -> f64 {
    let (x, a, n) = (Dd::from(x), Dd::from(alpha), Dd::from(n));
    let half = Dd::from(0.5);
    (gaussian_term(x, n) * half + (Dd::from(1.0) + a) * half * x + (Dd::from(1.0) - a) * half * x * erf_scaled(x, n)).to_f64()
}

/// Exact convolution of Leaky ReLU with the Gaussian of width `1/n`.
pub fn sau_exact(x: f64, alpha: f64, n: f64) -> f64 {
    let (x, a, n) = (Dd::from(x), Dd::from(alpha), Dd::from(n));
    let half = Dd::from(0.5);
    ((Dd::from(1.0) + a) * half * x + (Dd::from(1.0) - a) * half * (x * erf_scaled(x, n) + gaussian_term(x, n))).to_f64()
}

/// Zero-centred variant: Gaussian term multiplied by `x`.
pub fn sau_zero_centered(x: f64, alpha: f64, n: f64) -> f64 {
    let (x, a, n) = (Dd::from(x), Dd::from(alpha), Dd::from(n));
    let half = Dd::from(0.5);
    (x * gaussian_term(x, n) * half + (Dd::from(1.0) + a) * half * x + (Dd::from(1.0) - a) * half * x * erf_scaled(x, n)).to_f64()
}

/// Central difference `(f(x+h) - f(x-h)) / (2h)`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
