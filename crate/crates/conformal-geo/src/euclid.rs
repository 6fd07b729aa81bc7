//! Closed-form conformal circles in Euclidean space.
//!
//! The two-parameter family through the origin with initial velocity
//! `(1, 0, ...)` and initial acceleration `(alpha, beta, 0, ...)`:
//!
//! ```text
//! tau -> 2 / ((2 - alpha tau)^2 + beta^2 tau^2) * ((2 - alpha tau) tau, beta tau^2)
//! ```
//!
//! For `beta != 0` the trajectory is a round circle centred at
//! `(0, 1/beta)`; for `beta = 0` it degenerates to the x-axis with the
//! projective parameterization `x = 2 tau / (2 - alpha tau)`. These exact
//! curves are the oracle the integrator is validated against.

use crate::error::{Error, Result};
use crate::tensor::check_dim;

const POLE_EPS: f64 = 1e-300;

/// Parameters `(alpha, beta)` of the explicit solution family, padded
/// with zeros into an ambient dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleParams {
    pub alpha: f64,
    pub beta: f64,
    pub ambient_dim: usize,
}

impl CircleParams {
    pub fn new(alpha: f64, beta: f64, ambient_dim: usize) -> Result<Self> {
        check_dim(ambient_dim)?;
        if !(alpha.is_finite() && beta.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(CircleParams {
            alpha,
            beta,
            ambient_dim,
        })
    }

    /// The degenerate straight-line case.
    pub fn is_line(&self) -> bool {
        self.beta == 0.0
    }
}

fn pad(mut head: Vec<f64>, n: usize) -> Vec<f64> {
    head.resize(n, 0.0);
    head
}

/// Point of the curve at parameter `tau`.
///
/// The denominator `(2 - alpha tau)^2 + beta^2 tau^2` vanishes only in
/// the line case `beta = 0` at `tau = 2/alpha`, which is reported as a
/// parameter pole.
pub fn eval_circle(p: &CircleParams, tau: f64) -> Result<Vec<f64>> {
    let u = 2.0 - p.alpha * tau;
    let denom = u * u + p.beta * p.beta * tau * tau;
    if denom <= POLE_EPS {
        return Err(Error::ParameterPole(tau));
    }
    let s = 2.0 / denom;
    Ok(pad(vec![s * u * tau, s * p.beta * tau * tau], p.ambient_dim))
}

/// Velocity `d/dtau` of the curve, by differentiating the closed form.
pub fn eval_circle_velocity(p: &CircleParams, tau: f64) -> Result<Vec<f64>> {
    let a = p.alpha;
    let b = p.beta;
    let u = 2.0 - a * tau;
    let denom = u * u + b * b * tau * tau;
    if denom <= POLE_EPS {
        return Err(Error::ParameterPole(tau));
    }
    let ddenom = -2.0 * a * u + 2.0 * b * b * tau;
    // x = 2 u tau / denom, y = 2 b tau^2 / denom
    let xnum = 2.0 * (u - a * tau); // d/dtau of 2 u tau
    let ynum = 4.0 * b * tau;
    let x = (xnum * denom - 2.0 * u * tau * ddenom) / (denom * denom);
    let y = (ynum * denom - 2.0 * b * tau * tau * ddenom) / (denom * denom);
    Ok(pad(vec![x, y], p.ambient_dim))
}

/// Centre and radius of the circle traced for `beta != 0`.
///
/// The curve passes through the origin, so the radius is the distance
/// from the origin to the centre `(0, 1/beta)`.
pub fn circle_center_radius(p: &CircleParams) -> Result<(Vec<f64>, f64)> {
    if p.is_line() {
        return Err(Error::DegenerateLine);
    }
    let center = pad(vec![0.0, 1.0 / p.beta], p.ambient_dim);
    Ok((center, 1.0 / p.beta.abs()))
}

/// Projective parameterization of the degenerate line:
/// `x(tau) = 2 tau / (2 - alpha tau)`.
pub fn line_param(alpha: f64, tau: f64) -> Result<f64> {
    let denom = 2.0 - alpha * tau;
    if denom.abs() <= POLE_EPS {
        return Err(Error::ParameterPole(tau));
    }
    Ok(2.0 * tau / denom)
}

/// Limit of the curve as `tau -> +/- infinity`, defined only for
/// `beta != 0`.
pub fn limit_point(p: &CircleParams) -> Result<Vec<f64>> {
    if p.is_line() {
        return Err(Error::NoFiniteLimit);
    }
    let s = 2.0 / (p.alpha * p.alpha + p.beta * p.beta);
    Ok(pad(vec![-s * p.alpha, s * p.beta], p.ambient_dim))
}

/// The `tau = 1` point of the curve with `beta = sigma (2 - alpha)`:
/// `(2 / (2 - alpha)) (1 / (1 + sigma^2)) (1, sigma)`.
///
/// Only `alpha < 2` is admitted; the `alpha -> 2` limit leaves every
/// compact set.
pub fn endpoint_sigma(alpha: f64, sigma: f64) -> Result<Vec<f64>> {
    if !alpha.is_finite() || alpha >= 2.0 {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let s = 2.0 / ((2.0 - alpha) * (1.0 + sigma * sigma));
    Ok(vec![s, s * sigma])
}

/// Norm of [`endpoint_sigma`]: `2 / ((2 - alpha) sqrt(1 + sigma^2))`.
pub fn endpoint_sigma_norm(alpha: f64, sigma: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha >= 2.0 {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    Ok(2.0 / ((2.0 - alpha) * (1.0 + sigma * sigma).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn starts_at_origin() {
        for (alpha, beta) in [(0.0, 1.0), (1.5, -0.3), (2.0, 0.0)] {
            let p = CircleParams::new(alpha, beta, 3).unwrap();
            assert_eq!(eval_circle(&p, 0.0).unwrap(), vec![0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn unit_circle_point() {
        let p = CircleParams::new(0.0, 1.0, 2).unwrap();
        let pt = eval_circle(&p, 1.0).unwrap();
        assert_relative_eq!(pt[0], 0.8, epsilon = 1e-15);
        assert_relative_eq!(pt[1], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn fixed_curve_hits_one_at_half() {
        let p = CircleParams::new(2.0, 0.0, 2).unwrap();
        let pt = eval_circle(&p, 0.5).unwrap();
        assert_relative_eq!(pt[0], 1.0, epsilon = 1e-15);
        assert_eq!(pt[1], 0.0);
    }

    #[test]
    fn line_pole_is_reported() {
        let p = CircleParams::new(2.0, 0.0, 2).unwrap();
        assert!(matches!(
            eval_circle(&p, 1.0),
            Err(Error::ParameterPole(_))
        ));
        assert!(matches!(line_param(2.0, 1.0), Err(Error::ParameterPole(_))));
    }

    #[test]
    fn center_and_radius() {
        let p = CircleParams::new(0.7, 1.0, 2).unwrap();
        let (center, radius) = circle_center_radius(&p).unwrap();
        assert_eq!(center, vec![0.0, 1.0]);
        assert_eq!(radius, 1.0);

        let p = CircleParams::new(0.0, 2.0, 2).unwrap();
        let (center, radius) = circle_center_radius(&p).unwrap();
        assert_eq!(center, vec![0.0, 0.5]);
        assert_eq!(radius, 0.5);

        let line = CircleParams::new(1.0, 0.0, 2).unwrap();
        assert!(matches!(
            circle_center_radius(&line),
            Err(Error::DegenerateLine)
        ));
    }

    #[test]
    fn samples_lie_on_the_circle() {
        for (alpha, beta) in [(0.0, 1.0), (1.0, 0.5), (1.5, -2.0), (0.5, 2.0)] {
            let p = CircleParams::new(alpha, beta, 2).unwrap();
            let (center, radius) = circle_center_radius(&p).unwrap();
            for k in 0..100 {
                let tau = -5.0 + 10.0 * (k as f64) / 99.0;
                let pt = eval_circle(&p, tau).unwrap();
                assert!(
                    (dist(&pt, &center) - radius).abs() <= 1e-12,
                    "off circle at tau={tau} for ({alpha},{beta})"
                );
            }
        }
    }

    #[test]
    fn line_param_values() {
        assert_relative_eq!(line_param(0.0, 0.7).unwrap(), 0.7);
        assert_relative_eq!(line_param(2.0, 0.5).unwrap(), 1.0);
        assert_relative_eq!(line_param(1.0, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn limit_points() {
        let p = CircleParams::new(0.0, 1.0, 2).unwrap();
        assert_eq!(limit_point(&p).unwrap(), vec![0.0, 2.0]);
        let p = CircleParams::new(1.0, 1.0, 2).unwrap();
        assert_eq!(limit_point(&p).unwrap(), vec![-1.0, 1.0]);
        let p = CircleParams::new(1.0, 0.0, 2).unwrap();
        assert!(matches!(limit_point(&p), Err(Error::NoFiniteLimit)));
    }

    #[test]
    fn limit_is_approached_for_large_tau() {
        // The gap closes like O(1/tau) with a constant of a few units, so
        // the 1e-6 bound kicks in around |tau| ~ 1e7 for this family.
        for (alpha, beta) in [(0.0, 1.0), (1.0, 1.0), (1.5, -0.5)] {
            let p = CircleParams::new(alpha, beta, 2).unwrap();
            let lim = limit_point(&p).unwrap();
            for tau in [1e7, -1e7, 3e8] {
                let pt = eval_circle(&p, tau).unwrap();
                assert!(dist(&pt, &lim) <= 1e-6, "gap {} at tau={tau}", dist(&pt, &lim));
            }
            // O(1/tau) rate: scaling tau by 10 shrinks the gap ~10x.
            let g1 = dist(&eval_circle(&p, 1e6).unwrap(), &lim);
            let g2 = dist(&eval_circle(&p, 1e7).unwrap(), &lim);
            assert!(g2 <= 0.2 * g1);
        }
    }

    #[test]
    fn endpoint_examples() {
        assert_eq!(endpoint_sigma(0.0, 0.0).unwrap(), vec![1.0, 0.0]);
        let e = endpoint_sigma(1.0, 1.0).unwrap();
        assert_relative_eq!(e[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(e[1], 1.0, epsilon = 1e-15);
        let n = norm(&endpoint_sigma(1.9, 1.0).unwrap());
        assert_relative_eq!(n, 14.142135623730951, epsilon = 1e-10);
        assert_relative_eq!(endpoint_sigma_norm(1.9, 1.0).unwrap(), n, epsilon = 1e-12);
        assert!(matches!(
            endpoint_sigma(2.0, 0.3),
            Err(Error::AlphaOutOfRange(_))
        ));
    }

    #[test]
    fn endpoint_consistent_with_curve() {
        for i in 0..8 {
            let alpha = 2.0 * (i as f64) / 8.0;
            for j in -4i32..=4 {
                let sigma = j as f64 / 4.0;
                let beta = sigma * (2.0 - alpha);
                let p = CircleParams::new(alpha, beta, 2).unwrap();
                let from_curve = eval_circle(&p, 1.0).unwrap();
                let from_formula = endpoint_sigma(alpha, sigma).unwrap();
                assert!(dist(&from_curve, &from_formula) <= 1e-12 * norm(&from_formula).max(1.0));
            }
        }
    }

    #[test]
    fn endpoint_monotone_in_alpha_with_fixed_direction() {
        for sigma in [-1.0f64, -0.5, 0.0, 0.5, 1.0] {
            let dir_norm = (1.0 + sigma * sigma).sqrt();
            let mut prev = 0.0;
            for k in 0..40 {
                let alpha = 1.99 * (k as f64) / 39.0;
                let e = endpoint_sigma(alpha, sigma).unwrap();
                let n = norm(&e);
                assert!(n > prev, "norm not increasing at alpha={alpha}");
                prev = n;
                assert_relative_eq!(e[0] / n, 1.0 / dir_norm, epsilon = 1e-12);
                assert_relative_eq!(e[1] / n, sigma / dir_norm, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn velocity_matches_finite_differences() {
        let p = CircleParams::new(0.8, 1.3, 2).unwrap();
        let h = 1e-6;
        for tau in [-0.7, 0.0, 0.4, 1.2] {
            let v = eval_circle_velocity(&p, tau).unwrap();
            let xp = eval_circle(&p, tau + h).unwrap();
            let xm = eval_circle(&p, tau - h).unwrap();
            for i in 0..2 {
                assert_relative_eq!(v[i], (xp[i] - xm[i]) / (2.0 * h), epsilon = 1e-7);
            }
        }
    }

    /// Richardson-refined third derivative of a scalar function. The
    /// 4-point stencil has an h^2 error series, so the usual 4/3 weights
    /// cancel the leading term.
    fn third_derivative(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
        let stencil = |h: f64| {
            (f(t + 2.0 * h) - 2.0 * f(t + h) + 2.0 * f(t - h) - f(t - 2.0 * h)) / (2.0 * h * h * h)
        };
        (4.0 * stencil(h / 2.0) - stencil(h)) / 3.0
    }

    fn second_derivative(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
        let stencil =
            |h: f64| (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h);
        (4.0 * stencil(h / 2.0) - stencil(h)) / 3.0
    }

    fn first_derivative(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
        let stencil = |h: f64| (f(t + h) - f(t - h)) / (2.0 * h);
        (4.0 * stencil(h / 2.0) - stencil(h)) / 3.0
    }

    #[test]
    fn closed_form_satisfies_flat_ode() {
        // dA/dtau = 3 (V.A / V.V) A - (3 A.A / (2 V.V)) V with Euclidean dots.
        let h = 3e-3;
        for (alpha, beta) in [(0.0, 1.0), (1.0, 0.5), (0.5, 2.0)] {
            let p = CircleParams::new(alpha, beta, 2).unwrap();
            for tau in [0.1, 0.45, 0.8] {
                let coord = |i: usize| {
                    let p = p;
                    move |t: f64| eval_circle(&p, t).unwrap()[i]
                };
                let v: Vec<f64> = (0..2).map(|i| first_derivative(coord(i), tau, h)).collect();
                let a: Vec<f64> = (0..2).map(|i| second_derivative(coord(i), tau, h)).collect();
                let da: Vec<f64> = (0..2).map(|i| third_derivative(coord(i), tau, h)).collect();
                let vv: f64 = v.iter().map(|x| x * x).sum();
                let va: f64 = v.iter().zip(&a).map(|(x, y)| x * y).sum();
                let aa: f64 = a.iter().map(|x| x * x).sum();
                for i in 0..2 {
                    let rhs = 3.0 * va / vv * a[i] - 1.5 * aa / vv * v[i];
                    assert!(
                        (da[i] - rhs).abs() <= 1e-6 * rhs.abs().max(1.0),
                        "flat ODE defect at tau={tau} for ({alpha},{beta}): {} vs {}",
                        da[i],
                        rhs
                    );
                }
            }
        }
    }
}
