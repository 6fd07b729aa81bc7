//! Pointwise curvature of a metric field: Christoffel symbols, Ricci,
//! scalar curvature, and the conformal Schouten tensor.
//!
//! Index conventions, fixed once and pinned by the sphere-positivity
//! tests:
//!
//! ```text
//! Gamma^a_bc = 1/2 g^{ad} (d_b g_dc + d_c g_bd - d_d g_bc)
//! R^a_bcd    = d_c Gamma^a_db - d_d Gamma^a_cb
//!              + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb
//! R_bd       = R^a_bad,    R = g^{bd} R_bd
//! P_ab       = (R_ab - R g_ab / (2(n-1))) / (n-2)
//! ```
//!
//! With these signs the round sphere has positive scalar curvature and
//! `P = g/2` on the unit sphere. The full Riemann tensor is an internal
//! intermediate; only Ricci, scalar, and Schouten are exposed.

use crate::error::{Error, Result};
use crate::metric::MetricField;
use crate::tensor::{SymMatrix, Tensor3, Tensor4, Vector};

/// Curvature data of a metric field evaluated at one point.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CurvatureAtPoint {
    /// Christoffel symbols `Gamma^a_bc`, indexed `(a, b, c)`, symmetric in
    /// `(b, c)`.
    pub gamma: Tensor3,
    /// Ricci tensor `R_ab`.
    pub ricci: SymMatrix,
    /// Scalar curvature `R = g^{ab} R_ab`.
    pub scalar: f64,
    /// Schouten tensor `P_ab`.
    pub schouten: SymMatrix,
    /// Mixed Schouten `P_b{}^a = g^{ac} P_cb`, stored as `[b][a]`.
    pub schouten_mixed: Vec<Vec<f64>>,
    /// Metric at the point.
    pub metric: SymMatrix,
    /// Inverse metric at the point.
    pub metric_inverse: SymMatrix,
}

impl CurvatureAtPoint {
    /// Flat data: zero Christoffels and curvature for the given metric.
    /// Valid in every dimension, including n = 2 where the Schouten
    /// tensor itself is undefined and is taken as zero.
    pub fn flat(metric: SymMatrix) -> Result<Self> {
        let n = metric.dim();
        let metric_inverse = metric.inverse()?;
        Ok(CurvatureAtPoint {
            gamma: Tensor3::zeros(n),
            ricci: SymMatrix::zeros(n),
            scalar: 0.0,
            schouten: SymMatrix::zeros(n),
            schouten_mixed: vec![vec![0.0; n]; n],
            metric,
            metric_inverse,
        })
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// `(Gamma^a_bc X^b Y^c)_a`.
    pub fn gamma_apply(&self, x: &Vector, y: &Vector) -> Vector {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for a in 0..n {
            let mut acc = 0.0;
            for b in 0..n {
                for c in 0..n {
                    acc += self.gamma.get(a, b, c) * x[b] * y[c];
                }
            }
            out[a] = acc;
        }
        Vector::new(out).expect("finite Christoffel contraction")
    }

    /// `(P_b{}^a V^b)_a`.
    pub fn schouten_mixed_apply(&self, v: &Vector) -> Vector {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for a in 0..n {
            let mut acc = 0.0;
            for b in 0..n {
                acc += self.schouten_mixed[b][a] * v[b];
            }
            out[a] = acc;
        }
        Vector::new(out).expect("finite Schouten contraction")
    }

    /// `P_bc X^b Y^c`.
    pub fn schouten_quad(&self, x: &Vector, y: &Vector) -> f64 {
        crate::tensor::inner(&self.schouten, x, y).expect("dimension-checked contraction")
    }
}

/// Christoffel symbols `Gamma^a_bc` of the field at `x`.
pub fn christoffel(field: &MetricField, x: &[f64]) -> Result<Tensor3> {
    let g = field.metric_at(x)?;
    let g_inv = g.inverse()?;
    let (dg, _) = field.metric_derivs(x)?;
    Ok(christoffel_from_derivs(&g_inv, &dg))
}

fn christoffel_from_derivs(g_inv: &SymMatrix, dg: &Tensor3) -> Tensor3 {
    let n = g_inv.dim();
    Tensor3::from_fn(n, |a, b, c| {
        let mut acc = 0.0;
        for d in 0..n {
            // d_b g_dc + d_c g_bd - d_d g_bc
            let t = dg.get(d, c, b) + dg.get(b, d, c) - dg.get(b, c, d);
            acc += 0.5 * g_inv.get(a, d) * t;
        }
        acc
    })
}

/// Full curvature package at `x`. Requires n >= 3: the Schouten tensor
/// divides by n - 2.
pub fn curvature_at(field: &MetricField, x: &[f64]) -> Result<CurvatureAtPoint> {
    let n = field.dim();
    if n < 3 {
        return Err(Error::UnsupportedDimension(n, "3..=8 for curvature"));
    }
    let g = field.metric_at(x)?;
    let g_inv = g.inverse()?;
    let (dg, ddg) = field.metric_derivs(x)?;

    let gamma = christoffel_from_derivs(&g_inv, &dg);

    // d_c g^{ab} = -g^{ae} (d_c g_ef) g^{fb}
    let dg_inv = Tensor3::from_fn(n, |a, b, c| {
        let mut acc = 0.0;
        for e in 0..n {
            for f in 0..n {
                acc -= g_inv.get(a, e) * dg.get(e, f, c) * g_inv.get(f, b);
            }
        }
        acc
    });

    // d_d Gamma^a_bc
    let dgamma = Tensor4::from_fn(n, |a, b, c, d| {
        let mut acc = 0.0;
        for e in 0..n {
            let t = dg.get(e, c, b) + dg.get(b, e, c) - dg.get(b, c, e);
            let dt = ddg.get(e, c, b, d) + ddg.get(b, e, c, d) - ddg.get(b, c, e, d);
            acc += 0.5 * (dg_inv.get(a, e, d) * t + g_inv.get(a, e) * dt);
        }
        acc
    });

    // R^a_bcd
    let riemann = Tensor4::from_fn(n, |a, b, c, d| {
        let mut acc = dgamma.get(a, d, b, c) - dgamma.get(a, c, b, d);
        for e in 0..n {
            acc += gamma.get(a, c, e) * gamma.get(e, d, b) - gamma.get(a, d, e) * gamma.get(e, c, b);
        }
        acc
    });

    let ricci = SymMatrix::from_fn(n, |b, d| (0..n).map(|a| riemann.get(a, b, a, d)).sum());

    let mut scalar = 0.0;
    for b in 0..n {
        for d in 0..n {
            scalar += g_inv.get(b, d) * ricci.get(b, d);
        }
    }

    let nf = n as f64;
    let schouten = SymMatrix::from_fn(n, |a, b| {
        (ricci.get(a, b) - scalar / (2.0 * (nf - 1.0)) * g.get(a, b)) / (nf - 2.0)
    });

    let schouten_mixed = (0..n)
        .map(|b| {
            (0..n)
                .map(|a| (0..n).map(|c| g_inv.get(a, c) * schouten.get(c, b)).sum())
                .collect()
        })
        .collect();

    Ok(CurvatureAtPoint {
        gamma,
        ricci,
        scalar,
        schouten,
        schouten_mixed,
        metric: g,
        metric_inverse: g_inv,
    })
}
