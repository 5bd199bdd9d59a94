//! Owen's T function
//!
//! ```text
//! T(h, a) = 1/(2π) ∫_0^a exp(-h²(1+x²)/2) / (1+x²) dx
//! ```
//!
//! Symmetries reduce every call to `h >= 0`, `0 <= a <= 1`:
//! `T(-h, a) = T(h, a)`, `T(h, -a) = -T(h, a)`, and for `a > 1`
//!
//! ```text
//! T(h, a) = ½[Φ(h)Q(ah) + Φ(ah)Q(h)] - T(ah, 1/a)
//! ```
//!
//! with `Q = 1 - Φ`. The remaining integral is smooth on `[0, 1]`; it is
//! split into panels no wider than `min(0.5, 1.5/h)` and each panel gets a
//! 20-point Gauss-Legendre rule. The absolute error stays below 1e-15.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::normal::{big_phi, big_q};

const GL_POINTS: usize = 20;

/// Beyond this `exp(-h²/2)/(2π)` is below 1e-300 and the integral vanishes.
const H_CUTOFF: f64 = 37.5;

pub fn owens_t(h: f64, a: f64) -> f64 {
    let h = h.abs();
    if a < 0.0 {
        return -owens_t(h, -a);
    }
    if a == 0.0 {
        return 0.0;
    }
    if a <= 1.0 {
        return integral(h, a);
    }
    if a.is_infinite() {
        return 0.5 * big_q(h);
    }
    let ah = a * h;
    0.5 * (big_phi(h) * big_q(ah) + big_phi(ah) * big_q(h)) - integral(ah, 1.0 / a)
}

/// The defining integral for `h >= 0`, `0 < a <= 1`.
fn integral(h: f64, a: f64) -> f64 {
    if h > H_CUTOFF {
        return 0.0;
    }
    let (nodes, weights) = gauss_legendre();
    let width = if h > 3.0 { 1.5 / h } else { 0.5 };
    let panels = (a / width).ceil().max(1.0) as usize;
    let step = a / panels as f64;
    let half_h2 = 0.5 * h * h;

    let mut sum = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * step;
        let half = 0.5 * step;
        let mut panel = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            let t = mid + half * x;
            let q = 1.0 + t * t;
            panel += w * (-half_h2 * q).exp() / q;
        }
        sum += panel * half;
    }
    sum / (2.0 * PI)
}

/// Nodes and weights on [-1, 1], found by Newton iteration on the Legendre
/// polynomial.
fn gauss_legendre() -> &'static ([f64; GL_POINTS], [f64; GL_POINTS]) {
    static RULE: OnceLock<([f64; GL_POINTS], [f64; GL_POINTS])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_POINTS;
        let mut nodes = [0.0; GL_POINTS];
        let mut weights = [0.0; GL_POINTS];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson on the defining integral, very fine grid.
    fn simpson_oracle(h: f64, a: f64) -> f64 {
        let n = 200_000;
        let step = a / n as f64;
        let f = |x: f64| (-0.5 * h * h * (1.0 + x * x)).exp() / (1.0 + x * x);
        let mut s = f(0.0) + f(a);
        for i in 1..n {
            let x = i as f64 * step;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * step / 3.0 / (2.0 * PI)
    }

    #[test]
    fn quadrature_rule_integrates_polynomials() {
        let (nodes, weights) = gauss_legendre();
        let total: f64 = weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let x38: f64 = nodes.iter().zip(weights).map(|(x, w)| w * x.powi(38)).sum();
        assert!((x38 - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn zero_h_is_arctan() {
        for a in [0.1f64, 0.5, 1.0, 3.0, 50.0] {
            let want = a.atan() / (2.0 * PI);
            assert!((owens_t(0.0, a) - want).abs() < 1e-15, "a={a}");
        }
    }

    #[test]
    fn unit_a_identity() {
        // T(h, 1) = Φ(h)Q(h)/2
        for h in [0.0, 0.3, 1.0, 2.5, 6.0] {
            let want = 0.5 * big_phi(h) * big_q(h);
            assert!((owens_t(h, 1.0) - want).abs() < 1e-15, "h={h}");
        }
    }

    #[test]
    fn high_precision_reference_values() {
        // 40-digit quadrature reference values
        let cases = [
            (0.0625, 0.25, 3.891_193_023_470_136_7e-2),
            (6.5, 0.4375, 2.000_577_304_850_831_5e-11),
            (7.0, 0.96875, 6.399_062_719_389_868_5e-13),
            (4.78125, 0.0625, 1.063_297_480_468_746_4e-7),
            (2.0, 0.5, 8.625_077_985_521_507e-3),
            (1.0, 0.9999975, 6.674_180_897_822_859e-2),
            (0.5, 5.0, 1.541_321_936_687_864e-1),
            (3.0, 20.0, 6.749_490_158_150_473e-4),
        ];
        for (h, a, want) in cases {
            let got = owens_t(h, a);
            assert!((got - want).abs() < 1e-16 + 1e-12 * want, "T({h},{a}) = {got}, want {want}");
        }
    }

    #[test]
    fn agrees_with_fine_simpson_over_a_range() {
        for &h in &[0.0, 0.2, 0.9, 1.7, 3.3, 5.0, 8.0] {
            for &a in &[0.05, 0.4, 0.8, 1.0] {
                let got = owens_t(h, a);
                let want = simpson_oracle(h, a);
                assert!((got - want).abs() < 1e-13, "T({h},{a}) {got} vs {want}");
            }
        }
    }

    #[test]
    fn large_a_branch_matches_direct_integral() {
        for &h in &[0.1, 0.7, 1.5, 3.0] {
            for &a in &[1.5, 4.0, 20.0] {
                let direct = {
                    let n = 400_000;
                    let step = a / n as f64;
                    let f = |x: f64| (-0.5 * h * h * (1.0 + x * x)).exp() / (1.0 + x * x);
                    let mut s = f(0.0) + f(a);
                    for i in 1..n {
                        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * step);
                    }
                    s * step / 3.0 / (2.0 * PI)
                };
                assert!((owens_t(h, a) - direct).abs() < 1e-12, "T({h},{a})");
            }
        }
    }

    #[test]
    fn symmetries() {
        assert_eq!(owens_t(-1.3, 0.7), owens_t(1.3, 0.7));
        assert_eq!(owens_t(1.3, -0.7), -owens_t(1.3, 0.7));
        assert_eq!(owens_t(40.0, 0.5), 0.0);
        assert!((owens_t(0.0, f64::INFINITY) - 0.25).abs() < 1e-16);
    }
}
