//! Smooth Approximation Unit (SAU) and the baseline activations it is
//! compared against.
//!
//! SAU is Leaky ReLU with slope `alpha` convolved with the Gaussian
//! `phi_n(x) = n phi(n x)`. Three forms are provided:
//!
//! * [`sau_forward`]: the commonly quoted closed form, whose Gaussian term is
//!   `(1/(2n)) sqrt(2/pi) e^{-n^2 x^2/2}`. Its gradients are [`sau_grad_x`]
//!   and [`sau_grad_alpha`].
//! * [`sau_exact_forward`]: the true convolution. Its Gaussian term carries an
//!   extra `(1 - alpha)` factor, so it sits below the quoted form by exactly
//!   `(alpha/2)(1/n) sqrt(2/pi) e^{-n^2 x^2/2}`.
//! * [`sau_zero_centered_forward`]: the quoted form with the Gaussian term
//!   multiplied by `x`, so the unit passes through the origin.
//!
//! `n` is a fixed sharpness hyper-parameter; `alpha` is trainable.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::scalar_math::{erf, erfc, exp_neg_half_sq, gaussian_cdf, gaussian_pdf, sigmoid, FRAC_1_SQRT_2PI, SQRT_2_OVER_PI};

/// Beyond `|n x|` of this size `erf(n x / sqrt 2)` is exactly `+-1` and the
/// Gaussian term is below `e^-50`, so every SAU form equals Leaky ReLU.
pub const SATURATION_THRESHOLD: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActivationError {
    #[error("SAU sharpness n must be finite and > 0, got {0}")]
    InvalidSharpness(f64),
    #[error("activation slope must be finite, got {0}")]
    NonFiniteSlope(f64),
    #[error("unknown activation `{0}` (expected one of: {names})", names = ActivationKind::NAMES.join(", "))]
    Unknown(String),
}

/// The `(alpha, n)` pair of a SAU unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SauParams {
    alpha: f64,
    n: f64,
}

impl SauParams {
    pub const DEFAULT_ALPHA: f64 = 0.15;
    pub const DEFAULT_N: f64 = 20000.0;

    /// Validates `n > 0`. `alpha == 1` is accepted but logged: Leaky ReLU[1]
    /// is the identity, which has no kink to smooth.
    pub fn new(alpha: f64, n: f64) -> Result<Self, ActivationError> {
        if !(n.is_finite() && n > 0.0) {
            return Err(ActivationError::InvalidSharpness(n));
        }
        if !alpha.is_finite() {
            return Err(ActivationError::NonFiniteSlope(alpha));
        }
        if alpha == 1.0 {
            log::warn!("SAU with alpha = 1 smooths the identity; the result is x itself");
        }
        Ok(SauParams { alpha, n })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    /// Replace `alpha` after an optimizer step. No clamping is applied.
    pub fn with_alpha(self, alpha: f64) -> Self {
        SauParams { alpha, ..self }
    }
}

impl Default for SauParams {
    fn default() -> Self {
        SauParams {
            alpha: Self::DEFAULT_ALPHA,
            n: Self::DEFAULT_N,
        }
    }
}

/// Value of an activation and its partials with respect to the input and the
/// trainable slope (0 when the activation has none).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActivationEval {
    pub value: f64,
    pub d_dx: f64,
    pub d_dalpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SauForm {
    Quoted,
    Exact,
    ZeroCentered,
}

fn sau_eval(form: SauForm, x: f64, p: SauParams) -> ActivationEval {
    let SauParams { alpha, n } = p;
    let pos = 0.5 * (1.0 + alpha);
    let neg = 0.5 * (1.0 - alpha);
    let t = n * x;

    if t.abs() > SATURATION_THRESHOLD {
        return if x > 0.0 {
            ActivationEval {
                value: pos * x + neg * x,
                d_dx: 1.0,
                d_dalpha: 0.0,
            }
        } else {
            ActivationEval {
                value: pos * x - neg * x,
                d_dx: alpha,
                d_dalpha: x,
            }
        };
    }

    let u = t * std::f64::consts::FRAC_1_SQRT_2;
    let g = exp_neg_half_sq(t);
    let e = erf(u);
    let ec = erfc(u);
    // (1/(2n)) sqrt(2/pi) e^{-n^2 x^2 / 2}
    let half_gauss = SQRT_2_OVER_PI * g / (2.0 * n);
    // n (1 - alpha) / sqrt(2 pi) * x * e^{-n^2 x^2 / 2}
    let erf_chain = n * (1.0 - alpha) * FRAC_1_SQRT_2PI * x * g;

    match form {
        SauForm::Quoted => ActivationEval {
            value: half_gauss + pos * x + neg * x * e,
            d_dx: (-(n * n) * x / (2.0 * n)) * SQRT_2_OVER_PI * g + pos + neg * e + erf_chain,
            d_dalpha: 0.5 * x * ec,
        },
        SauForm::Exact => {
            let gauss = SQRT_2_OVER_PI * g / n;
            ActivationEval {
                value: pos * x + neg * (x * e + gauss),
                // the two Gaussian contributions cancel exactly
                d_dx: pos + neg * e,
                d_dalpha: 0.5 * (x * ec - gauss),
            }
        }
        SauForm::ZeroCentered => ActivationEval {
            value: x * half_gauss + pos * x + neg * x * e,
            d_dx: half_gauss * (1.0 - t * t) + pos + neg * e + erf_chain,
            d_dalpha: 0.5 * x * ec,
        },
    }
}

/// Quoted closed form:
/// `(1/(2n)) sqrt(2/pi) e^{-n^2x^2/2} + ((1+a)/2) x + ((1-a)/2) x erf(n x / sqrt 2)`.
pub fn sau_forward(x: f64, p: SauParams) -> f64 {
    sau_eval(SauForm::Quoted, x, p).value
}

/// Exact `(LeakyReLU[a] * phi_n)(x)`:
/// `((1+a)/2) x + ((1-a)/2) [x erf(n x / sqrt 2) + (1/n) sqrt(2/pi) e^{-n^2x^2/2}]`.
pub fn sau_exact_forward(x: f64, p: SauParams) -> f64 {
    sau_eval(SauForm::Exact, x, p).value
}

/// Zero-centred form; exactly 0 at `x = 0`.
pub fn sau_zero_centered_forward(x: f64, p: SauParams) -> f64 {
    sau_eval(SauForm::ZeroCentered, x, p).value
}

/// `dG/dx` of [`sau_forward`].
pub fn sau_grad_x(x: f64, p: SauParams) -> f64 {
    sau_eval(SauForm::Quoted, x, p).d_dx
}

/// `dG/dalpha = (x/2)(1 - erf(n x / sqrt 2))` of [`sau_forward`].
///
/// Evaluated as `(x/2) erfc(.)` so the right tail keeps its relative accuracy.
pub fn sau_grad_alpha(x: f64, p: SauParams) -> f64 {
    sau_eval(SauForm::Quoted, x, p).d_dalpha
}

pub fn sau_exact_grad_x(x: f64, p: SauParams) -> f64 {
    sau_eval(SauForm::Exact, x, p).d_dx
}

pub fn sau_exact_grad_alpha(x: f64, p: SauParams) -> f64 {
    sau_eval(SauForm::Exact, x, p).d_dalpha
}

pub fn sau_zero_centered_grad_x(x: f64, p: SauParams) -> f64 {
    sau_eval(SauForm::ZeroCentered, x, p).d_dx
}

pub fn sau_zero_centered_grad_alpha(x: f64, p: SauParams) -> f64 {
    sau_eval(SauForm::ZeroCentered, x, p).d_dalpha
}

/// `x` for `x >= 0`, `alpha x` otherwise.
#[inline]
pub fn leaky_relu(x: f64, alpha: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        alpha * x
    }
}

/// An activation together with its hyper-parameters.
///
/// At the kinks of the piecewise-linear baselines the right-hand derivative
/// is reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    Sau(SauParams),
    SauExact(SauParams),
    SauZeroCentered(SauParams),
    Relu,
    LeakyRelu { slope: f64 },
    Elu { scale: f64 },
    Softplus,
    Swish,
    Gelu,
    Prelu { slope: f64 },
    Relu6,
}

impl ActivationKind {
    pub const NAMES: [&'static str; 11] = [
        "sau",
        "sau-exact",
        "sau-zc",
        "relu",
        "leaky-relu",
        "elu",
        "softplus",
        "swish",
        "gelu",
        "prelu",
        "relu6",
    ];

    pub const LEAKY_RELU_SLOPE: f64 = 0.01;
    pub const PRELU_INIT: f64 = 0.25;

    /// Builds an activation from its CLI name. `slope` overrides the initial
    /// trainable slope of SAU variants and PReLU; `n` applies to SAU only.
    pub fn from_name(name: &str, slope: Option<f64>, n: Option<f64>) -> Result<Self, ActivationError> {
        let sau = || SauParams::new(slope.unwrap_or(SauParams::DEFAULT_ALPHA), n.unwrap_or(SauParams::DEFAULT_N));
        Ok(match name {
            "sau" => ActivationKind::Sau(sau()?),
            "sau-exact" => ActivationKind::SauExact(sau()?),
            "sau-zc" => ActivationKind::SauZeroCentered(sau()?),
            "relu" => ActivationKind::Relu,
            "leaky-relu" => ActivationKind::LeakyRelu {
                slope: Self::LEAKY_RELU_SLOPE,
            },
            "elu" => ActivationKind::Elu { scale: 1.0 },
            "softplus" => ActivationKind::Softplus,
            "swish" => ActivationKind::Swish,
            "gelu" => ActivationKind::Gelu,
            "prelu" => {
                let slope = slope.unwrap_or(Self::PRELU_INIT);
                if !slope.is_finite() {
                    return Err(ActivationError::NonFiniteSlope(slope));
                }
                ActivationKind::Prelu { slope }
            }
            "relu6" => ActivationKind::Relu6,
            other => return Err(ActivationError::Unknown(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::Sau(_) => "sau",
            ActivationKind::SauExact(_) => "sau-exact",
            ActivationKind::SauZeroCentered(_) => "sau-zc",
            ActivationKind::Relu => "relu",
            ActivationKind::LeakyRelu { .. } => "leaky-relu",
            ActivationKind::Elu { .. } => "elu",
            ActivationKind::Softplus => "softplus",
            ActivationKind::Swish => "swish",
            ActivationKind::Gelu => "gelu",
            ActivationKind::Prelu { .. } => "prelu",
            ActivationKind::Relu6 => "relu6",
        }
    }

    /// Current value of the trainable slope, if the activation has one.
    pub fn trainable_param(&self) -> Option<f64> {
        match self {
            ActivationKind::Sau(p) | ActivationKind::SauExact(p) | ActivationKind::SauZeroCentered(p) => Some(p.alpha()),
            ActivationKind::Prelu { slope } => Some(*slope),
            _ => None,
        }
    }

    /// Overwrite the trainable slope. No-op for activations without one.
    pub fn set_trainable_param(&mut self, value: f64) {
        match self {
            ActivationKind::Sau(p) | ActivationKind::SauExact(p) | ActivationKind::SauZeroCentered(p) => *p = p.with_alpha(value),
            ActivationKind::Prelu { slope } => *slope = value,
            _ => {}
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> ActivationEval {
        activation_eval(self, x)
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        activation_eval(self, x).value
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = ActivationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActivationKind::from_name(s, None, None)
    }
}

#[inline]
fn piecewise_linear(x: f64, slope: f64) -> ActivationEval {
    if x >= 0.0 {
        ActivationEval {
            value: x,
            d_dx: 1.0,
            d_dalpha: 0.0,
        }
    } else {
        ActivationEval {
            // + 0.0 turns the -0 of a zero slope into +0
            value: slope * x + 0.0,
            d_dx: slope,
            d_dalpha: 0.0,
        }
    }
}

/// Value, `d/dx` and `d/dalpha` of `kind` at `x`.
pub fn activation_eval(kind: &ActivationKind, x: f64) -> ActivationEval {
    match *kind {
        ActivationKind::Sau(p) => sau_eval(SauForm::Quoted, x, p),
        ActivationKind::SauExact(p) => sau_eval(SauForm::Exact, x, p),
        ActivationKind::SauZeroCentered(p) => sau_eval(SauForm::ZeroCentered, x, p),
        ActivationKind::Relu => piecewise_linear(x, 0.0),
        ActivationKind::LeakyRelu { slope } => piecewise_linear(x, slope),
        ActivationKind::Prelu { slope } => {
            let mut out = piecewise_linear(x, slope);
            if x < 0.0 {
                out.d_dalpha = x;
            }
            out
        }
        ActivationKind::Elu { scale } => {
            if x >= 0.0 {
                ActivationEval {
                    value: x,
                    d_dx: 1.0,
                    d_dalpha: 0.0,
                }
            } else {
                let e = x.exp();
                ActivationEval {
                    value: scale * (e - 1.0),
                    d_dx: scale * e,
                    d_dalpha: 0.0,
                }
            }
        }
        ActivationKind::Softplus => ActivationEval {
            value: x.max(0.0) + (-x.abs()).exp().ln_1p(),
            d_dx: sigmoid(x),
            d_dalpha: 0.0,
        },
        ActivationKind::Swish => {
            let s = sigmoid(x);
            ActivationEval {
                value: x * s,
                d_dx: s * (1.0 + x * (1.0 - s)),
                d_dalpha: 0.0,
            }
        }
        ActivationKind::Gelu => {
            let cdf = gaussian_cdf(x);
            ActivationEval {
                value: x * cdf,
                d_dx: cdf + x * gaussian_pdf(x),
                d_dalpha: 0.0,
            }
        }
        ActivationKind::Relu6 => {
            if x < 0.0 {
                ActivationEval::default()
            } else if x < 6.0 {
                ActivationEval {
                    value: x,
                    d_dx: 1.0,
                    d_dalpha: 0.0,
                }
            } else {
                ActivationEval {
                    value: 6.0,
                    d_dx: 0.0,
                    d_dalpha: 0.0,
                }
            }
        }
    }
}
