//! Scalar special functions shared by the activation kernels and the
//! quadrature oracle.
//!
//! `erf`/`erfc` follow the FreeBSD msun rational approximations
//! (Sun Microsystems, 1993; freely redistributable with this notice), which
//! are accurate to about one ulp over the whole real line.

#![allow(clippy::excessive_precision)] // coefficients kept as tabulated

use std::f64::consts::FRAC_2_SQRT_PI;

/// `1 / sqrt(2 pi)`.
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_9;
/// `sqrt(2 / pi)`.
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_355_879_892_119_868_763_7;

/// Largest `t^2 / 2` for which `exp(-t^2/2)` is still a (subnormal) non-zero double.
const EXP_UNDERFLOW_ARG: f64 = 745.2;

const ERX: f64 = 8.45062911510467529297e-01;
// erf on [0, 0.84375]
const EFX8: f64 = 1.02703333676410069053e+00;
const PP0: f64 = 1.28379167095512558561e-01;
const PP1: f64 = -3.25042107247001499370e-01;
const PP2: f64 = -2.84817495755985104766e-02;
const PP3: f64 = -5.77027029648944159157e-03;
const PP4: f64 = -2.37630166566501626084e-05;
const QQ1: f64 = 3.97917223959155352819e-01;
const QQ2: f64 = 6.50222499887672944485e-02;
const QQ3: f64 = 5.08130628187576562776e-03;
const QQ4: f64 = 1.32494738004321644526e-04;
const QQ5: f64 = -3.96022827877536812320e-06;
// erf on [0.84375, 1.25]
const PA0: f64 = -2.36211856075265944077e-03;
const PA1: f64 = 4.14856118683748331666e-01;
const PA2: f64 = -3.72207876035701323847e-01;
const PA3: f64 = 3.18346619901161753674e-01;
const PA4: f64 = -1.10894694282396677476e-01;
const PA5: f64 = 3.54783043256182359371e-02;
const PA6: f64 = -2.16637559486879084300e-03;
const QA1: f64 = 1.06420880400844228286e-01;
const QA2: f64 = 5.40397917702171048937e-01;
const QA3: f64 = 7.18286544141962662868e-02;
const QA4: f64 = 1.26171219808761642112e-01;
const QA5: f64 = 1.36370839120290507362e-02;
const QA6: f64 = 1.19844998467991074170e-02;
// erfc on [1.25, 1/0.35]
const RA0: f64 = -9.86494403484714822705e-03;
const RA1: f64 = -6.93858572707181764372e-01;
const RA2: f64 = -1.05586262253232909814e+01;
const RA3: f64 = -6.23753324503260060396e+01;
const RA4: f64 = -1.62396669462573470355e+02;
const RA5: f64 = -1.84605092906711035994e+02;
const RA6: f64 = -8.12874355063065934246e+01;
const RA7: f64 = -9.81432934416914548592e+00;
const SA1: f64 = 1.96512716674392571292e+01;
const SA2: f64 = 1.37657754143519042600e+02;
const SA3: f64 = 4.34565877475229228821e+02;
const SA4: f64 = 6.45387271733267880336e+02;
const SA5: f64 = 4.29008140027567833386e+02;
const SA6: f64 = 1.08635005541779435134e+02;
const SA7: f64 = 6.57024977031928170135e+00;
const SA8: f64 = -6.04244152148580987438e-02;
// erfc on [1/0.35, 28]
const RB0: f64 = -9.86494292470009928597e-03;
const RB1: f64 = -7.99283237680523006574e-01;
const RB2: f64 = -1.77579549177547519889e+01;
const RB3: f64 = -1.60636384855821916062e+02;
const RB4: f64 = -6.37566443368389627722e+02;
const RB5: f64 = -1.02509513161107724954e+03;
const RB6: f64 = -4.83519191608651397019e+02;
const SB1: f64 = 3.03380607434824582924e+01;
const SB2: f64 = 3.25792512996573918826e+02;
const SB3: f64 = 1.53672958608443695994e+03;
const SB4: f64 = 3.19985821950859553908e+03;
const SB5: f64 = 2.55305040643316442583e+03;
const SB6: f64 = 4.74528541206955367215e+02;
const SB7: f64 = -2.24409524465858183362e+01;

#[inline]
fn high_word(x: f64) -> u32 {
    (x.to_bits() >> 32) as u32
}

#[inline]
fn clear_low_word(x: f64) -> f64 {
    f64::from_bits(x.to_bits() & 0xffff_ffff_0000_0000)
}

/// Rational part of `erf(x)` for `|x| < 0.84375`, i.e. `R` in `erf(x) = x + x R(x^2)`.
#[inline]
fn small_ratio(x: f64) -> f64 {
    let z = x * x;
    let r = PP0 + z * (PP1 + z * (PP2 + z * (PP3 + z * PP4)));
    let s = 1.0 + z * (QQ1 + z * (QQ2 + z * (QQ3 + z * (QQ4 + z * QQ5))));
    r / s
}

/// `erf(|x|) - ERX` for `0.84375 <= |x| < 1.25`.
#[inline]
fn near_one(x: f64) -> f64 {
    let s = x.abs() - 1.0;
    let p = PA0 + s * (PA1 + s * (PA2 + s * (PA3 + s * (PA4 + s * (PA5 + s * PA6)))));
    let q = 1.0 + s * (QA1 + s * (QA2 + s * (QA3 + s * (QA4 + s * (QA5 + s * QA6)))));
    p / q
}

/// `erfc(|x|)` for `1.25 <= |x| < 28`.
fn erfc_tail(ix: u32, x: f64) -> f64 {
    let x = x.abs();
    let s = 1.0 / (x * x);
    let (r, big_s) = if ix < 0x4006_db6d {
        (
            RA0 + s * (RA1 + s * (RA2 + s * (RA3 + s * (RA4 + s * (RA5 + s * (RA6 + s * RA7)))))),
            1.0 + s * (SA1 + s * (SA2 + s * (SA3 + s * (SA4 + s * (SA5 + s * (SA6 + s * (SA7 + s * SA8))))))),
        )
    } else {
        (
            RB0 + s * (RB1 + s * (RB2 + s * (RB3 + s * (RB4 + s * (RB5 + s * RB6))))),
            1.0 + s * (SB1 + s * (SB2 + s * (SB3 + s * (SB4 + s * (SB5 + s * (SB6 + s * SB7)))))),
        )
    };
    // exp(-x^2) split as exp(-z^2) exp((z - x)(z + x)) with z = x truncated to 20 bits
    let z = clear_low_word(x);
    (-z * z - 0.5625).exp() * ((z - x) * (z + x) + r / big_s).exp() / x
}

/// Gaussian error function `(2/sqrt(pi)) * integral_0^x exp(-t^2) dt`.
///
/// Odd, monotone, and exactly `+-1` once `|x| >= 6`, where `1 - |erf(x)|`
/// is below half an ulp of 1.
pub fn erf(x: f64) -> f64 {
    let hx = high_word(x);
    let negative = hx >> 31 != 0;
    let ix = hx & 0x7fff_ffff;
    if ix >= 0x7ff0_0000 {
        // NaN propagates, +-inf saturates
        return if x.is_nan() { x } else { x.signum() };
    }
    if ix < 0x3feb_0000 {
        // |x| < 0.84375
        if ix < 0x3e30_0000 {
            // |x| < 2^-28
            return 0.125 * (8.0 * x + EFX8 * x);
        }
        return x + x * small_ratio(x);
    }
    let y = if ix < 0x3ff4_0000 {
        ERX + near_one(x)
    } else if ix < 0x4018_0000 {
        1.0 - erfc_tail(ix, x)
    } else {
        1.0
    };
    if negative {
        -y
    } else {
        y
    }
}

/// Complementary error function `1 - erf(x)`, without cancellation for large `x`.
pub fn erfc(x: f64) -> f64 {
    let hx = high_word(x);
    let negative = hx >> 31 != 0;
    let ix = hx & 0x7fff_ffff;
    if ix >= 0x7ff0_0000 {
        return if x.is_nan() {
            x
        } else if negative {
            2.0
        } else {
            0.0
        };
    }
    if ix < 0x3feb_0000 {
        if ix < 0x3c70_0000 {
            return 1.0 - x;
        }
        let y = small_ratio(x);
        if negative || ix < 0x3fd0_0000 {
            return 1.0 - (x + x * y);
        }
        return 0.5 - (x - 0.5 + x * y);
    }
    if ix < 0x3ff4_0000 {
        let p = near_one(x);
        return if negative { 1.0 + ERX + p } else { 1.0 - ERX - p };
    }
    if ix < 0x403c_0000 {
        let t = erfc_tail(ix, x);
        return if negative { 2.0 - t } else { t };
    }
    if negative {
        2.0
    } else {
        0.0
    }
}

/// `d/dx erf(x) = (2/sqrt(pi)) exp(-x^2)`; flushes to 0 once `exp` underflows.
pub fn erf_derivative(x: f64) -> f64 {
    let sq = x * x;
    if !(sq <= 2.0 * EXP_UNDERFLOW_ARG) {
        return 0.0;
    }
    FRAC_2_SQRT_PI * (-sq).exp()
}

/// `exp(-t^2 / 2)`, exactly 0 when the exponent is beyond the subnormal range.
#[inline]
pub fn exp_neg_half_sq(t: f64) -> f64 {
    let half_sq = 0.5 * t * t;
    if !(half_sq <= EXP_UNDERFLOW_ARG) {
        return 0.0;
    }
    (-half_sq).exp()
}

/// Standard normal density.
#[inline]
pub fn gaussian_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * exp_neg_half_sq(x)
}

/// Standard normal CDF, `(1 + erf(x / sqrt 2)) / 2`, evaluated through `erfc`
/// so the left tail keeps its relative accuracy.
#[inline]
pub fn gaussian_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Logistic sigmoid, written to avoid `exp` overflow on either side.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use sau_oracle::Dd;
    use std::f64::consts::PI;

    // Reference values from 40-digit mpmath evaluations.
    const ERF_1: f64 = 0.842_700_792_949_714_869_341_220_635_082_609;
    const ERF_DERIV_1: f64 = 0.415_107_497_420_594_703_340_268_249_441_337;
    const PDF_1: f64 = 0.241_970_724_519_143_349_797_830_192_935_560;
    const EXP_M_HALF: f64 = 0.606_530_659_712_633_423_603_799_534_991_180;

    #[test]
    fn erf_examples() {
        assert_eq!(erf(0.0), 0.0);
        assert_eq!(erf(-0.7), -erf(0.7));
        assert!((erf(1.0) - ERF_1).abs() < 1e-15);
        let series = sau_oracle::erf_series(Dd::from(1.0)).to_f64();
        assert!((erf(1.0) - series).abs() < 1e-15);
    }

    #[test]
    fn erf_saturates_exactly() {
        assert_eq!(erf(6.0), 1.0);
        assert_eq!(erf(-6.5), -1.0);
        assert_eq!(erf(1e300), 1.0);
        assert_eq!(erf(f64::INFINITY), 1.0);
        assert_eq!(erf(f64::NEG_INFINITY), -1.0);
        // erfc(5.93) ~ 1.1e-16 is already below half an ulp of 1
        assert_eq!(erf(5.95), 1.0);
    }

    #[test]
    fn erf_against_oracle_on_grid() {
        let mut worst: f64 = 0.0;
        for i in -600..=600 {
            let x = f64::from(i) * 0.01;
            let oracle = sau_oracle::erf(Dd::from(x)).to_f64();
            worst = worst.max((erf(x) - oracle).abs());
        }
        assert!(worst <= 1e-15, "max abs error {worst:e}");
    }

    #[test]
    fn erfc_keeps_relative_accuracy_in_the_tail() {
        for &x in &[2.0, 4.0, 8.0, 15.0, 26.0] {
            let oracle = sau_oracle::erfc_continued_fraction(Dd::from(x)).to_f64();
            let rel = (erfc(x) - oracle).abs() / oracle;
            assert!(rel < 1e-14, "x={x}: rel {rel:e}");
        }
        assert_eq!(erfc(30.0), 0.0);
        assert_eq!(erfc(-30.0), 2.0);
        for i in -300..=300 {
            let x = f64::from(i) * 0.0137;
            assert!((erf(x) + erfc(x) - 1.0).abs() < 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn erf_derivative_examples() {
        assert_eq!(erf_derivative(0.0), FRAC_2_SQRT_PI);
        assert_eq!(erf_derivative(50.0), 0.0);
        assert_eq!(erf_derivative(f64::INFINITY), 0.0);
        assert!((erf_derivative(1.0) - ERF_DERIV_1).abs() < 1e-16);
    }

    #[test]
    fn erf_derivative_matches_finite_differences() {
        let h = 1e-5;
        for i in -400..=400 {
            let x = f64::from(i) * 0.01;
            let fd = (erf(x + h) - erf(x - h)) / (2.0 * h);
            assert!((fd - erf_derivative(x)).abs() <= 1e-6, "x = {x}");
        }
    }

    #[test]
    fn gaussian_examples() {
        assert_eq!(gaussian_pdf(0.0), FRAC_1_SQRT_2PI);
        assert_eq!(gaussian_pdf(2.5), gaussian_pdf(-2.5));
        assert!((gaussian_pdf(1.0) - PDF_1).abs() < 1e-16);
        assert!((FRAC_1_SQRT_2PI - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-16);
        assert!((SQRT_2_OVER_PI - (2.0 / PI).sqrt()).abs() < 1e-16);
    }

    #[test]
    fn exp_neg_half_sq_examples() {
        assert_eq!(exp_neg_half_sq(0.0), 1.0);
        assert_eq!(exp_neg_half_sq(20000.0 * 1.0), 0.0);
        assert_eq!(exp_neg_half_sq(f64::MAX), 0.0);
        let oracle = sau_oracle::exp(Dd::from(-0.5)).to_f64();
        assert!((exp_neg_half_sq(1.0) - oracle).abs() < 1e-16);
        assert!((oracle - EXP_M_HALF).abs() < 1e-16);
        // just inside the subnormal range
        assert!(exp_neg_half_sq(38.5) > 0.0);
    }

    #[test]
    fn gaussian_cdf_and_sigmoid_edges() {
        assert_eq!(gaussian_cdf(0.0), 0.5);
        assert!(gaussian_cdf(-40.0) >= 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    proptest! {
        #[test]
        fn erf_is_odd_and_bounded(x in -40.0f64..40.0) {
            prop_assert_eq!(erf(-x), -erf(x));
            prop_assert!(erf(x).abs() <= 1.0);
            prop_assert!(exp_neg_half_sq(x).is_finite());
        }

        #[test]
        fn erf_is_monotone(a in -7.0f64..7.0, d in 0.0f64..1.0) {
            prop_assert!(erf(a) <= erf(a + d));
        }
    }
}
