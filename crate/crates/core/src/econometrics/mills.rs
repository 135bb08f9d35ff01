//! The inverse Mills ratio and standard-normal helpers.
//!
//! The distribution functions here keep full relative precision across the
//! whole range the selection model touches (library cdf implementations lose
//! several digits in the left tail, which the quadrature oracle rejects).

use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use std::sync::OnceLock;

/// Backward-evaluation depth of the Mills-ratio continued fraction; enough
/// for full double precision at every z <= -1.
const CF_LEVELS: usize = 400;

fn standard_normal() -> &'static Normal {
    static N: OnceLock<Normal> = OnceLock::new();
    N.get_or_init(|| Normal::new(0.0, 1.0).unwrap())
}

pub fn normal_pdf(z: f64) -> f64 {
    standard_normal().pdf(z)
}

pub fn normal_quantile(p: f64) -> f64 {
    standard_normal().inverse_cdf(p)
}

/// Laplace continued fraction for the Mills ratio of the upper tail at
/// x = -z >= 1:
///   Phi(z)/phi(z) = 1 / (x + 1/(x + 2/(x + 3/(x + ...)))),
/// evaluated backward, so `x + cf` is the inverse Mills ratio directly.
fn mills_continued_fraction(z: f64) -> f64 {
    let x = -z;
    let mut cf = 0.0;
    for k in (1..=CF_LEVELS).rev() {
        cf = k as f64 / (x + cf);
    }
    x + cf
}

/// erf by its Taylor series; converges rapidly for the |x| <= 1/sqrt(2)
/// arguments the central branch feeds it.
fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let x2 = x * x;
    for n in 1..200 {
        term *= -x2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

pub fn normal_cdf(z: f64) -> f64 {
    if z <= -1.0 {
        normal_pdf(z) / mills_continued_fraction(z)
    } else if z < 1.0 {
        0.5 * (1.0 + erf_series(z / std::f64::consts::SQRT_2))
    } else {
        1.0 - normal_cdf(-z)
    }
}

/// Inverse Mills ratio `lambda(z) = phi(z) / Phi(z)`.
pub fn inverse_mills(z: f64) -> f64 {
    if z <= -1.0 {
        mills_continued_fraction(z)
    } else {
        normal_pdf(z) / normal_cdf(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn known_values() {
        // phi(0)/Phi(0) = 2 phi(0) = sqrt(2/pi)
        assert_relative_eq!(inverse_mills(0.0), 0.79788, max_relative = 1e-5);
        assert_relative_eq!(
            inverse_mills(0.0),
            (2.0 / std::f64::consts::PI).sqrt(),
            max_relative = 1e-14
        );
        // phi(-2)/Phi(-2) = 0.05399097/0.02275013
        assert_relative_eq!(inverse_mills(-2.0), 2.37320, max_relative = 1e-5);
        assert_relative_eq!(inverse_mills(-2.0), 2.373215532, max_relative = 1e-9);
    }

    #[test]
    fn vanishes_in_the_right_tail() {
        assert!(inverse_mills(8.0) < 1e-14);
        assert!(inverse_mills(40.0) >= 0.0);
    }

    #[test]
    fn deep_left_tail_is_finite_and_monotone() {
        let mut prev = inverse_mills(-8.0);
        for i in 1..200 {
            let z = -8.0 - i as f64 * 0.5;
            let lambda = inverse_mills(z);
            assert!(lambda.is_finite() && lambda > 0.0);
            assert!(lambda > prev, "lambda must grow as z decreases");
            prev = lambda;
        }
    }

    #[test]
    fn continuous_at_the_branch_switches() {
        for &at in &[-1.0, 1.0] {
            let a = inverse_mills(at + 1e-12);
            let b = inverse_mills(at - 1e-12);
            assert_relative_eq!(a, b, max_relative = 1e-11);
            let c = normal_cdf(at + 1e-12);
            let d = normal_cdf(at - 1e-12);
            assert_relative_eq!(c, d, max_relative = 1e-11);
        }
    }

    #[test]
    fn cdf_complement_identity() {
        for i in -40..=40 {
            let z = i as f64 / 5.0;
            assert_relative_eq!(normal_cdf(z) + normal_cdf(-z), 1.0, max_relative = 1e-13);
        }
    }

    /// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
    fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                // Legendre P_n(x) and derivative by recurrence.
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        out
    }

    /// Quadrature oracle for lambda(z): with x = z - t,
    ///   Phi(z) = phi(z) * integral_0^inf exp(z t - t^2 / 2) dt,
    /// so lambda(z) = 1 / I(z). The integrand is well scaled for all z in
    /// [-8, 8], so the ratio keeps full relative precision.
    fn mills_quadrature(z: f64) -> f64 {
        let nodes = gauss_legendre(60);
        let mut integral = 0.0;
        let upper = 60.0;
        let panels = 30;
        let width = upper / panels as f64;
        for p in 0..panels {
            let a = p as f64 * width;
            for &(x, w) in &nodes {
                let t = a + width * (x + 1.0) / 2.0;
                integral += w * width / 2.0 * (z * t - t * t / 2.0).exp();
            }
        }
        1.0 / integral
    }

    #[test]
    fn matches_quadrature_across_the_whole_range() {
        for i in -16..=16 {
            let z = i as f64 / 2.0;
            assert_relative_eq!(
                inverse_mills(z),
                mills_quadrature(z),
                max_relative = 1e-12
            );
        }
    }
}
