//! Stereographic chart between R^n and the unit sphere S^n in R^{n+1}.
//!
//! Projection is from the north pole `(0, ..., 0, 1)`: the chart origin
//! maps to the south pole and the excluded point at infinity is the north
//! pole itself. The chart map pulls the ambient round metric back to
//! `omega^2 * delta` with `omega = 2 / (1 + |x|^2)`.

use crate::error::{Error, Result};
use crate::tensor::check_dim;

/// Margin below 1 within which the last coordinate counts as "at the
/// pole" for [`from_sphere`].
pub const POLE_EPS: f64 = 1e-12;

/// A point on the unit sphere S^n, stored as n+1 ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    /// Validates unit norm to within 1e-12.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_dim(coords.len().saturating_sub(1))?;
        if !coords.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = coords.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "sphere point has norm {norm}, expected 1"
            )));
        }
        Ok(SpherePoint { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Chart dimension n (the sphere lives in R^{n+1}).
    pub fn chart_dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn north_pole(chart_dim: usize) -> Self {
        let mut coords = vec![0.0; chart_dim + 1];
        coords[chart_dim] = 1.0;
        SpherePoint { coords }
    }

    /// Straight-line distance in the ambient R^{n+1}.
    pub fn chordal_distance(&self, other: &SpherePoint) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Inverse stereographic projection: chart point to sphere point.
///
/// `x -> (2x, |x|^2 - 1) / (|x|^2 + 1)`. Injective, never reaches the
/// north pole for finite `x`.
pub fn to_sphere(x: &[f64]) -> Result<SpherePoint> {
    check_dim(x.len())?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let s = 1.0 + r2;
    let mut coords: Vec<f64> = x.iter().map(|&v| 2.0 * v / s).collect();
    coords.push((r2 - 1.0) / s);
    Ok(SpherePoint { coords })
}

/// Stereographic projection: sphere point to chart point.
///
/// Computed as `x_i = p_i (1 + p_last) / |p_head|^2`, which avoids the
/// cancellation in `1 - p_last` near the south-to-north transition and
/// keeps the round trip accurate out to large chart radii. Points within
/// [`POLE_EPS`] of the north pole have no chart image.
pub fn from_sphere(p: &SpherePoint) -> Result<Vec<f64>> {
    let n = p.chart_dim();
    let last = p.coords[n];
    if last >= 1.0 - POLE_EPS {
        return Err(Error::AtProjectionPole { margin: POLE_EPS });
    }
    let head_sq: f64 = p.coords[..n].iter().map(|v| v * v).sum();
    if head_sq == 0.0 {
        // Exactly the south pole.
        return Ok(vec![0.0; n]);
    }
    let scale = (1.0 + last) / head_sq;
    Ok(p.coords[..n].iter().map(|&v| v * scale).collect())
}

/// Conformal factor of the chart: `omega(x) = 2 / (1 + |x|^2)`. The
/// pulled-back round metric is `omega^2 * delta`.
pub fn conformal_factor(x: &[f64]) -> f64 {
    2.0 / (1.0 + x.iter().map(|v| v * v).sum::<f64>())
}

/// Chordal distance from the image of `x` to the north pole:
/// `2 / sqrt(1 + |x|^2)`. Monotone decreasing in `|x|`.
pub fn pole_distance(x: &[f64]) -> f64 {
    2.0 / (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn origin_maps_to_south_pole() {
        let p = to_sphere(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.coords(), &[0.0, 0.0, 0.0, -1.0]);
        assert_eq!(from_sphere(&p).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn unit_points_map_to_equator() {
        let p = to_sphere(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(p.coords()[0], 1.0, epsilon = 1e-15);
        assert_eq!(p.coords()[2], 0.0);
    }

    #[test]
    fn example_point() {
        let p = to_sphere(&[3.0, 0.0]).unwrap();
        assert_relative_eq!(p.coords()[0], 0.6, epsilon = 1e-15);
        assert_eq!(p.coords()[1], 0.0);
        assert_relative_eq!(p.coords()[2], 0.8, epsilon = 1e-15);
        let back = from_sphere(&p).unwrap();
        assert_relative_eq!(back[0], 3.0, epsilon = 1e-13);
    }

    #[test]
    fn north_pole_has_no_image() {
        let p = SpherePoint::north_pole(2);
        assert!(matches!(
            from_sphere(&p),
            Err(Error::AtProjectionPole { .. })
        ));
    }

    #[test]
    fn output_is_unit_norm() {
        for x in [[0.1, -4.0, 2.5], [1000.0, 0.0, 0.0], [0.0, 0.0, 1e-8]] {
            let p = to_sphere(&x).unwrap();
            let norm: f64 = p.coords().iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn conformal_factor_values() {
        assert_eq!(conformal_factor(&[0.0, 0.0]), 2.0);
        assert_relative_eq!(conformal_factor(&[0.6, 0.8]), 1.0, epsilon = 1e-15);
        assert_relative_eq!(conformal_factor(&[1000.0, 0.0]), 2e-6, max_relative = 1e-5);
    }

    #[test]
    fn jacobian_is_conformal() {
        // Finite-difference Jacobian J of to_sphere must satisfy
        // J^T J = omega^2 I.
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(5);
        let n = 3;
        let h = 1e-5;
        for _ in 0..50 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut jac = vec![vec![0.0; n]; n + 1]; // rows: ambient, cols: chart
            for c in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[c] += h;
                xm[c] -= h;
                let pp = to_sphere(&xp).unwrap();
                let pm = to_sphere(&xm).unwrap();
                for r in 0..=n {
                    jac[r][c] = (pp.coords()[r] - pm.coords()[r]) / (2.0 * h);
                }
            }
            let w = conformal_factor(&x);
            for i in 0..n {
                for j in 0..n {
                    let jtj: f64 = (0..=n).map(|r| jac[r][i] * jac[r][j]).sum();
                    let expected = if i == j { w * w } else { 0.0 };
                    assert!(
                        (jtj - expected).abs() <= 1e-6,
                        "J^T J defect at {x:?}: ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn pole_distance_formula_and_monotonicity() {
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let r = 0.05 * (k as f64 + 1.0);
            let x = [r, 0.0, 0.0];
            let d = to_sphere(&x)
                .unwrap()
                .chordal_distance(&SpherePoint::north_pole(3));
            assert_relative_eq!(d, pole_distance(&x), epsilon = 1e-12);
            assert!(d < prev);
            prev = d;
            if r >= 1.0 {
                assert!(d <= 2.0 / r);
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip(xs in proptest::collection::vec(-1e4f64..1e4, 3)) {
            let p = to_sphere(&xs).unwrap();
            let back = from_sphere(&p).unwrap();
            let scale = xs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..3 {
                prop_assert!((back[i] - xs[i]).abs() <= 1e-12 * scale);
            }
        }
    }
}
