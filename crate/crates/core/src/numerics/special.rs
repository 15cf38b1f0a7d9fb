//! Gaussian and one-degree-of-freedom chi-square distribution functions.
//!
//! Everything here reduces to the complementary error function, which is
//! evaluated with Cody's rational approximations (relative error below
//! 1e-15 over the whole range). The chi-square functions are the exact
//! identities F1(u) = 2*Phi(sqrt(u)) - 1 and
//! F1_inv(s) = Phi_inv((s+1)/2)^2, and the non-central CDF is
//! Phi(sqrt(u) - sqrt(zeta)) - Phi(-sqrt(u) - sqrt(zeta)).

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const FRAC_1_SQRT_2PI: f64 = 0.3989422804014326779399460599343818684;

/// Smallest / largest probability accepted before quantile inversion.
/// Threshold arguments such as 1 - c1*sigma^2/n can leave [0,1) numerically.
pub const PROB_CLAMP: f64 = 1e-15;

/// Clamp a probability to [PROB_CLAMP, 1 - PROB_CLAMP].
pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

// Cody's coefficients for erf on |x| <= 0.46875.
const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];

// Cody's coefficients for erfc on 0.46875 < x <= 4.
const ERFC_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERFC_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];

// Cody's coefficients for erfc on x > 4.
const ERFC_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERFC_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];

const ONE_OVER_SQRT_PI: f64 = 5.6418958354775628695e-1;

/// erf(x) for |x| <= 0.46875.
fn erf_small(x: f64) -> f64 {
    let z = x * x;
    let mut num = ERF_A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + ERF_A[i]) * z;
        den = (den + ERF_B[i]) * z;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

/// exp(-y^2) split as exp(-ysq^2) * exp(-del) with ysq a 1/16 grid point,
/// which preserves relative accuracy of the product for large y.
fn exp_neg_y2(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// erfc(y) for y > 0.46875.
fn erfc_large(y: f64) -> f64 {
    if y <= 4.0 {
        let mut num = ERFC_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERFC_C[i]) * y;
            den = (den + ERFC_D[i]) * y;
        }
        exp_neg_y2(y) * (num + ERFC_C[7]) / (den + ERFC_D[7])
    } else {
        let z = 1.0 / (y * y);
        let mut num = ERFC_P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + ERFC_P[i]) * z;
            den = (den + ERFC_Q[i]) * z;
        }
        let r = z * (num + ERFC_P[4]) / (den + ERFC_Q[4]);
        let tail = (ONE_OVER_SQRT_PI - r) / y;
        exp_neg_y2(y) * tail
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        1.0 - erf_small(x)
    } else if x > 0.0 {
        erfc_large(y)
    } else {
        2.0 - erfc_large(y)
    }
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        erf_small(x)
    } else if x > 0.0 {
        1.0 - erfc_large(y)
    } else {
        erfc_large(y) - 1.0
    }
}

/// Standard normal CDF Phi(x).
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("std_normal_cdf: non-finite x = {x}")));
    }
    Ok(0.5 * erfc(-x / SQRT_2))
}

/// Standard normal density.
fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

// Acklam's rational initializer for the normal quantile.
const INV_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const INV_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const INV_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const INV_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

/// Quantile for p in (0, 0.5]; the initializer is refined by one Newton
/// step against the Cody CDF, which lands within a few ulp.
fn inv_cdf_lower_half(p: f64) -> f64 {
    let mut x = if p < 0.02425 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((INV_C[0] * q + INV_C[1]) * q + INV_C[2]) * q + INV_C[3]) * q + INV_C[4]) * q
            + INV_C[5])
            / ((((INV_D[0] * q + INV_D[1]) * q + INV_D[2]) * q + INV_D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((INV_A[0] * r + INV_A[1]) * r + INV_A[2]) * r + INV_A[3]) * r + INV_A[4]) * r
            + INV_A[5])
            * q
            / (((((INV_B[0] * r + INV_B[1]) * r + INV_B[2]) * r + INV_B[3]) * r + INV_B[4]) * r
                + 1.0)
    };
    let err = 0.5 * erfc(-x / SQRT_2) - p;
    x -= err / std_normal_pdf(x);
    x
}

/// Standard normal inverse CDF (quantile function).
pub fn std_normal_inv_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!(
            "std_normal_inv_cdf: p = {p} outside (0, 1)"
        )));
    }
    if p > 0.5 {
        Ok(-inv_cdf_lower_half(1.0 - p))
    } else {
        Ok(inv_cdf_lower_half(p))
    }
}

/// Central chi-square CDF with one degree of freedom:
/// F1(u) = 2*Phi(sqrt(u)) - 1, evaluated as erf(sqrt(u/2)) so the tail
/// rounds once instead of losing a digit to the doubled subtraction.
pub fn chi2_1_cdf(u: f64) -> Result<f64> {
    if !u.is_finite() || u < 0.0 {
        return Err(Error::invalid(format!("chi2_1_cdf: u = {u} must be >= 0")));
    }
    Ok(erf((0.5 * u).sqrt()))
}

/// Central chi-square quantile with one degree of freedom:
/// F1_inv(p) = Phi_inv((p+1)/2)^2. For p past one half the equivalent
/// form -Phi_inv((1-p)/2) is used; (1-p) is exact there, which keeps the
/// far tail at the precision the argument itself carries.
pub fn chi2_1_inv_cdf(p: f64) -> Result<f64> {
    if !(p >= 0.0 && p < 1.0) {
        return Err(Error::invalid(format!(
            "chi2_1_inv_cdf: p = {p} outside [0, 1)"
        )));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let z = if p <= 0.5 {
        std_normal_inv_cdf((p + 1.0) / 2.0)?
    } else {
        -std_normal_inv_cdf((1.0 - p) / 2.0)?
    };
    Ok(z * z)
}

/// Non-central chi-square CDF with one degree of freedom and
/// non-centrality zeta:
/// F(u, zeta) = Phi(sqrt(u) - sqrt(zeta)) - Phi(-sqrt(u) - sqrt(zeta)).
pub fn noncentral_chi2_1_cdf(u: f64, zeta: f64) -> Result<f64> {
    if !u.is_finite() || u < 0.0 {
        return Err(Error::invalid(format!(
            "noncentral_chi2_1_cdf: u = {u} must be >= 0"
        )));
    }
    if !zeta.is_finite() || zeta < 0.0 {
        return Err(Error::invalid(format!(
            "noncentral_chi2_1_cdf: zeta = {zeta} must be >= 0"
        )));
    }
    let su = u.sqrt();
    let sz = zeta.sqrt();
    Ok(std_normal_cdf(su - sz)? - std_normal_cdf(-su - sz)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_values() {
        // High-precision references evaluated with a 40-digit erf oracle.
        let cases = [
            (0.0, 0.5),
            (0.1, 0.5398278372770289814654),
            (0.5, 0.6914624612740131036377),
            (1.0, 0.8413447460685429485852),
            (1.959963985, 0.9750000000268815622992),
            (2.0, 0.9772498680518207927997),
            (3.0, 0.9986501019683699054733),
            (5.0, 0.9999997133484281208061),
            (-1.5, 0.06680720126885806600449),
            (-8.0, 6.220960574271784123516e-16),
        ];
        for (x, want) in cases {
            let got = std_normal_cdf(x).unwrap();
            assert!(
                (got - want).abs() <= 1e-15 * want.abs().max(1.0),
                "Phi({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn normal_cdf_symmetry() {
        for i in 0..2000 {
            let x = -10.0 + i as f64 * 0.01;
            let a = std_normal_cdf(x).unwrap();
            let b = std_normal_cdf(-x).unwrap();
            assert!((a + b - 1.0).abs() <= 1e-14, "symmetry failed at x = {x}");
        }
    }

    #[test]
    fn normal_cdf_tail() {
        assert!(std_normal_cdf(-40.0).unwrap() < 1e-300);
        assert!(std_normal_cdf(40.0).unwrap() == 1.0);
    }

    #[test]
    fn normal_cdf_rejects_non_finite() {
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn normal_inv_cdf_reference_values() {
        let z = std_normal_inv_cdf(0.975).unwrap();
        assert!((z - 1.959963984540054).abs() < 1e-8);
        assert_eq!(std_normal_inv_cdf(0.5).unwrap(), 0.0);
    }

    #[test]
    fn normal_inv_cdf_round_trip() {
        for i in 0..=1200 {
            let x = -6.0 + i as f64 * 0.01;
            let p = std_normal_cdf(x).unwrap();
            let back = std_normal_inv_cdf(p).unwrap();
            // Once the CDF value rounds to f64, the upper tail cannot be
            // recovered below dp / pdf(x); allow that conditioning floor.
            let pdf = FRAC_1_SQRT_2PI * (-0.5 * x * x).exp();
            let tol = (2.5e-16 / pdf).max(1e-10);
            assert!((back - x).abs() <= tol, "round trip at x = {x}: {back}");
        }
    }

    #[test]
    fn normal_inv_cdf_rejects_out_of_range() {
        assert!(std_normal_inv_cdf(0.0).is_err());
        assert!(std_normal_inv_cdf(1.0).is_err());
        assert!(std_normal_inv_cdf(-0.2).is_err());
        assert!(std_normal_inv_cdf(f64::NAN).is_err());
    }

    #[test]
    fn chi2_cdf_reference_values() {
        assert_eq!(chi2_1_cdf(0.0).unwrap(), 0.0);
        let got = chi2_1_cdf(3.841458821).unwrap();
        assert!((got - 0.95).abs() < 1e-8, "F1(3.841458821) = {got}");
        assert!(chi2_1_cdf(1e6).unwrap() > 1.0 - 1e-12);
        assert!(chi2_1_cdf(-0.5).is_err());
    }

    #[test]
    fn chi2_cdf_matches_phi_identity() {
        for i in 0..400 {
            let u = i as f64 * 0.1;
            let direct = chi2_1_cdf(u).unwrap();
            let via_phi = 2.0 * std_normal_cdf(u.sqrt()).unwrap() - 1.0;
            assert!((direct - via_phi).abs() <= 4e-16, "u = {u}: {direct} vs {via_phi}");
        }
    }

    #[test]
    fn chi2_inv_cdf_reference_values() {
        assert_eq!(chi2_1_inv_cdf(0.0).unwrap(), 0.0);
        let u95 = chi2_1_inv_cdf(0.95).unwrap();
        assert!((u95 - 3.841458820694126).abs() < 1e-6, "F1_inv(0.95) = {u95}");
        let u99 = chi2_1_inv_cdf(0.99).unwrap();
        assert!((u99 - 6.634896601021215).abs() < 1e-6, "F1_inv(0.99) = {u99}");
        assert!(chi2_1_inv_cdf(1.0).is_err());
        assert!(chi2_1_inv_cdf(-0.01).is_err());
    }

    #[test]
    fn chi2_round_trip_on_working_range() {
        // Past u ~ 33 the f64 spacing of the CDF value near 1 caps any
        // implementation's recovery at ~(half ulp) / pdf(u); allow three
        // times that floor there and the plain 1e-8 below it.
        for i in 0..=4000 {
            let u = i as f64 * 0.01;
            let p = chi2_1_cdf(u).unwrap();
            if p >= 1.0 {
                continue;
            }
            let back = chi2_1_inv_cdf(p).unwrap();
            let pdf = (-0.5 * u).exp() / (2.0 * std::f64::consts::PI * u.max(1e-12)).sqrt();
            let tol = 1e-8f64.max(3.0 * 5.6e-17 / pdf);
            assert!((back - u).abs() <= tol, "round trip at u = {u}: {back}");
        }
        // Forward identity: F1(F1_inv(p)) recovers p to near machine
        // precision everywhere on the range.
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let back = chi2_1_cdf(chi2_1_inv_cdf(p).unwrap()).unwrap();
            assert!((back - p).abs() <= 1e-12, "forward trip at p = {p}: {back}");
        }
    }

    #[test]
    fn noncentral_collapses_to_central_at_zero() {
        for i in 0..200 {
            let u = i as f64 * 0.25;
            let nc = noncentral_chi2_1_cdf(u, 0.0).unwrap();
            let c = chi2_1_cdf(u).unwrap();
            assert!((nc - c).abs() <= 1e-12);
        }
    }

    #[test]
    fn noncentral_reference_value() {
        // Phi(1) - Phi(-3), from the same oracle as above.
        let got = noncentral_chi2_1_cdf(4.0, 1.0).unwrap();
        assert!((got - 0.8399948480369129).abs() < 1e-12);
        assert_eq!(noncentral_chi2_1_cdf(0.0, 7.3).unwrap(), 0.0);
        assert!(noncentral_chi2_1_cdf(-1.0, 0.0).is_err());
        assert!(noncentral_chi2_1_cdf(1.0, -1.0).is_err());
    }

    #[test]
    fn clamp_probability_bounds() {
        assert_eq!(clamp_probability(-3.0), PROB_CLAMP);
        assert_eq!(clamp_probability(2.0), 1.0 - PROB_CLAMP);
        assert_eq!(clamp_probability(0.4), 0.4);
    }
}
