//! Skew-normal distribution: density, CDF, quantile and least-squares fit
//! to a histogram of samples.
//!
//! The CDF is `Φ(z) - 2·T(z, α)` with `z = (x - ξ)/ω` and `T` Owen's T
//! function; see [`owens_t`] for how T is evaluated.

mod fit;
pub mod normal;
mod owens_t;

pub use fit::{fit_least_squares, histogram, FitOutcome, Histogram, MAX_SHAPE};
pub use owens_t::owens_t;
pub(crate) use fit::quantile_sorted;

use crate::error::{Error, Result};
use normal::{big_phi, phi};

/// Location `ξ`, scale `ω > 0` and shape `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewNormalParams {
    pub location: f64,
    pub scale: f64,
    pub shape: f64,
}

impl SkewNormalParams {
    pub fn new(location: f64, scale: f64, shape: f64) -> Result<Self> {
        if !(location.is_finite() && shape.is_finite() && scale.is_finite() && scale > 0.0) {
            return Err(Error::Numeric(format!(
                "invalid skew-normal parameters (location {location}, scale {scale}, shape {shape})"
            )));
        }
        Ok(Self {
            location,
            scale,
            shape,
        })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        pdf(self, x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        cdf(self, x)
    }

    fn delta(&self) -> f64 {
        self.shape / (1.0 + self.shape * self.shape).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.location + self.scale * self.delta() * (2.0 / std::f64::consts::PI).sqrt()
    }

    pub fn variance(&self) -> f64 {
        let d = self.delta();
        self.scale * self.scale * (1.0 - 2.0 * d * d / std::f64::consts::PI)
    }

    /// Smallest `x` with `cdf(x) >= p`, by bisection.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let spread = self.variance().sqrt().max(self.scale * 1e-3);
        let (mut lo, mut hi) = (self.mean() - spread, self.mean() + spread);
        while self.cdf(lo) > p && lo.is_finite() {
            lo -= 2.0 * (hi - lo);
        }
        while self.cdf(hi) < p && hi.is_finite() {
            hi += 2.0 * (hi - lo);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// `(2/ω)·φ(z)·Φ(αz)`.
pub fn pdf(p: &SkewNormalParams, x: f64) -> f64 {
    let z = (x - p.location) / p.scale;
    2.0 / p.scale * phi(z) * big_phi(p.shape * z)
}

/// `Φ(z) - 2T(z, α)`, clamped into `[0, 1]`. Infinite `x` maps to 0 or 1.
pub fn cdf(p: &SkewNormalParams, x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    let z = (x - p.location) / p.scale;
    (big_phi(z) - 2.0 * owens_t(z, p.shape)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sn(location: f64, scale: f64, shape: f64) -> SkewNormalParams {
        SkewNormalParams::new(location, scale, shape).unwrap()
    }

    /// Adaptive Simpson quadrature, used only as an independent oracle.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            let delta = left + right - whole;
            if depth == 0 || delta.abs() <= 15.0 * tol {
                return left + right + delta / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 48)
    }

    fn integral_of_pdf(p: &SkewNormalParams, lo: f64, hi: f64) -> f64 {
        // split at the location so the peak is never straddled by a coarse panel
        let f = |x: f64| pdf(p, x);
        let cuts: Vec<f64> = (-40..=40).map(|k| p.location + k as f64 * p.scale).collect();
        let mut total = 0.0;
        let mut left = lo;
        for c in cuts.into_iter().filter(|c| *c > lo && *c < hi) {
            total += adaptive_simpson(&f, left, c, 1e-14);
            left = c;
        }
        total + adaptive_simpson(&f, left, hi, 1e-14)
    }

    #[test]
    fn zero_shape_reduces_to_normal() {
        assert!((pdf(&sn(0.0, 1.0, 0.0), 0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-16);
        for x in [-3.0, -0.4, 0.0, 1.1, 5.0] {
            assert!((cdf(&sn(0.0, 1.0, 0.0), x) - big_phi(x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn density_integrates_to_one() {
        for p in [sn(0.0, 1.0, 0.0), sn(1.0, 0.5, 3.0), sn(-2.0, 2.0, -7.0), sn(0.3, 0.1, 20.0)] {
            let total = integral_of_pdf(&p, p.location - 40.0 * p.scale, p.location + 40.0 * p.scale);
            assert!((total - 1.0).abs() < 1e-8, "{p:?}: {total}");
        }
    }

    #[test]
    fn strong_right_skew_kills_left_tail() {
        let p = sn(0.0, 1.0, 5.0);
        let v = pdf(&p, -3.0);
        assert!(v < 1e-6, "{v}");
        // cross-check against the closed form with a directly evaluated Φ
        let direct = 2.0 * (-4.5f64).exp() / (2.0 * PI).sqrt() * 0.5 * libm::erfc(15.0 / 2f64.sqrt());
        assert!((v - direct).abs() <= 1e-20);
    }

    #[test]
    fn cdf_at_location_is_arctan_identity() {
        for alpha in [-10.0, -1.0, 0.0, 0.5, 3.0, 19.0] {
            let p = sn(2.0, 0.7, alpha);
            let want = 0.5 - f64::atan(alpha) / PI;
            assert!((cdf(&p, 2.0) - want).abs() < 1e-14);
            let quad = integral_of_pdf(&p, 2.0 - 40.0 * 0.7, 2.0);
            assert!((quad - want).abs() < 1e-8);
        }
    }

    #[test]
    fn cdf_matches_quadrature_at_random_points() {
        let mut state = 12345u64;
        let mut uniform = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let p = sn(uniform() * 4.0 - 2.0, 0.2 + uniform() * 2.0, uniform() * 20.0 - 10.0);
            let x = p.location + (uniform() * 8.0 - 4.0) * p.scale;
            let quad = integral_of_pdf(&p, p.location - 40.0 * p.scale, x);
            assert!((cdf(&p, x) - quad).abs() < 1e-8, "{p:?} at {x}");
        }
    }

    #[test]
    fn limits_and_invalid_params() {
        let p = sn(0.0, 1.0, 2.0);
        assert_eq!(cdf(&p, f64::NEG_INFINITY), 0.0);
        assert_eq!(cdf(&p, f64::INFINITY), 1.0);
        assert!(cdf(&p, -50.0) < 1e-300);
        assert_eq!(cdf(&p, 50.0), 1.0);
        assert!(SkewNormalParams::new(0.0, 0.0, 1.0).is_err());
        assert!(SkewNormalParams::new(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        let p = sn(1.0, 0.5, 3.0);
        for q in [0.01, 0.25, 0.5, 0.99] {
            let x = p.quantile(q);
            assert!((cdf(&p, x) - q).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn derivative_of_cdf_is_pdf(
            loc in -3.0f64..3.0, scale in 0.3f64..3.0, shape in -5.0f64..5.0, u in -4.0f64..4.0
        ) {
            let p = sn(loc, scale, shape);
            let x = loc + u * scale;
            let h = 1e-5;
            let fd = (cdf(&p, x + h) - cdf(&p, x - h)) / (2.0 * h);
            prop_assert!((fd - pdf(&p, x)).abs() < 1e-6);
        }

        #[test]
        fn cdf_is_monotone_and_bounded(
            loc in -3.0f64..3.0, scale in 0.1f64..3.0, shape in -20.0f64..20.0,
            a in -10.0f64..10.0, b in -10.0f64..10.0,
        ) {
            let p = sn(loc, scale, shape);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (ca, cb) = (cdf(&p, lo), cdf(&p, hi));
            prop_assert!((0.0..=1.0).contains(&ca) && (0.0..=1.0).contains(&cb));
            prop_assert!(ca <= cb + 1e-15);
            prop_assert!(pdf(&p, lo) >= 0.0);
        }
    }
}
