//! Riemannian metric fields on a chart region.
//!
//! A [`MetricField`] evaluates the metric matrix (and its first and second
//! coordinate derivatives) at any chart point. Built-in fields cover the
//! Euclidean metric, the round-sphere metric in the stereographic chart
//! (`g = omega^2 * delta` with `omega = 2 / (1 + |x|^2)`), and conformal
//! rescalings of an existing field. Built-ins carry closed-form
//! derivatives; everything else falls back to central finite differences
//! with a step scaled by the distance from the origin.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{check_dim, Covector, SymMatrix, Tensor3, Tensor4};

/// How `metric_derivs` obtains derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivMode {
    ClosedForm,
    FiniteDifference { step: f64 },
}

pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Step used by a finite-difference stencil centred at `x`.
fn scaled_step(h: f64, x: &[f64]) -> f64 {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    h * r.max(1.0)
}

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

type OmegaFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type UpsilonFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A positive conformal factor `omega` together with the covector
/// `upsilon_a = d_a log(omega)`.
#[derive(Clone)]
pub struct ConformalFactor {
    label: String,
    omega: OmegaFn,
    upsilon: UpsilonRule,
}

#[derive(Clone)]
enum UpsilonRule {
    Closed(UpsilonFn),
    FiniteDifference { step: f64 },
}

impl ConformalFactor {
    /// Constant factor; `upsilon` vanishes identically.
    pub fn constant(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "constant conformal factor must be positive and finite, got {c}"
            )));
        }
        Ok(ConformalFactor {
            label: format!("const({c})"),
            omega: Arc::new(move |_| c),
            upsilon: UpsilonRule::Closed(Arc::new(|x| vec![0.0; x.len()])),
        })
    }

    /// The stereographic factor `omega = 2 / (1 + |x|^2)`, which rescales
    /// the Euclidean metric to the round sphere. `upsilon_a = -2 x_a / (1 + |x|^2)`.
    pub fn round_sphere() -> Self {
        ConformalFactor {
            label: "round_sphere".to_owned(),
            omega: Arc::new(|x| 2.0 / (1.0 + sq_norm(x))),
            upsilon: UpsilonRule::Closed(Arc::new(|x| {
                let s = 1.0 + sq_norm(x);
                x.iter().map(|&v| -2.0 * v / s).collect()
            })),
        }
    }

    /// Arbitrary positive factor; `upsilon` is finite-differenced from
    /// `log(omega)`.
    pub fn from_fn(
        label: impl Into<String>,
        omega: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ConformalFactor {
            label: label.into(),
            omega: Arc::new(omega),
            upsilon: UpsilonRule::FiniteDifference {
                step: DEFAULT_FD_STEP,
            },
        }
    }

    /// Pointwise product; omegas multiply and upsilons add.
    pub fn product(&self, other: &ConformalFactor) -> ConformalFactor {
        let oa = Arc::clone(&self.omega);
        let ob = Arc::clone(&other.omega);
        let a = self.clone();
        let b = other.clone();
        ConformalFactor {
            label: format!("{}*{}", self.label, other.label),
            omega: Arc::new(move |x| oa(x) * ob(x)),
            upsilon: UpsilonRule::Closed(Arc::new(move |x| {
                let ua = a.upsilon_at(x).expect("upsilon of factor product");
                let ub = b.upsilon_at(x).expect("upsilon of factor product");
                ua.components()
                    .iter()
                    .zip(ub.components())
                    .map(|(p, q)| p + q)
                    .collect()
            })),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn omega_at(&self, x: &[f64]) -> Result<f64> {
        let w = (self.omega)(x);
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::NonPositiveOmega {
                omega: w,
                point: x.to_vec(),
            });
        }
        Ok(w)
    }

    /// `upsilon_a = d_a log(omega)` at `x`.
    pub fn upsilon_at(&self, x: &[f64]) -> Result<Covector> {
        match &self.upsilon {
            UpsilonRule::Closed(f) => Covector::new(f(x)),
            UpsilonRule::FiniteDifference { step } => {
                let h = scaled_step(*step, x);
                let n = x.len();
                let mut grad = vec![0.0; n];
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                for c in 0..n {
                    xp[c] = x[c] + h;
                    xm[c] = x[c] - h;
                    let wp = self.omega_at(&xp)?;
                    let wm = self.omega_at(&xm)?;
                    grad[c] = (wp.ln() - wm.ln()) / (2.0 * h);
                    xp[c] = x[c];
                    xm[c] = x[c];
                }
                Covector::new(grad)
            }
        }
    }
}

impl fmt::Debug for ConformalFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConformalFactor")
            .field("label", &self.label)
            .finish()
    }
}

#[derive(Clone)]
enum FieldKind {
    Euclidean,
    RoundSphere,
    Rescaled {
        base: Box<MetricField>,
        factor: ConformalFactor,
    },
}

/// A metric on a chart region, evaluable with derivatives at any point
/// passing the domain guard.
#[derive(Clone)]
pub struct MetricField {
    dim: usize,
    kind: FieldKind,
    deriv_mode: DerivMode,
    name: String,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MetricField({}, n={})", self.name, self.dim)
    }
}

impl MetricField {
    /// Flat Euclidean metric on all of R^n.
    pub fn euclidean(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(MetricField {
            dim: n,
            kind: FieldKind::Euclidean,
            deriv_mode: DerivMode::ClosedForm,
            name: "euclidean".to_owned(),
        })
    }

    /// Round-sphere metric pulled back to the stereographic chart:
    /// `g = omega^2 * delta` with `omega = 2 / (1 + |x|^2)`. The chart
    /// covers all of R^n (the sphere minus one pole).
    pub fn round_sphere(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(MetricField {
            dim: n,
            kind: FieldKind::RoundSphere,
            deriv_mode: DerivMode::ClosedForm,
            name: "round_sphere".to_owned(),
        })
    }

    /// Conformal rescaling `g -> omega^2 g`. Derivatives of the rescaled
    /// field are finite-differenced.
    pub fn conformal_rescale(&self, factor: ConformalFactor) -> MetricField {
        let name = format!("rescaled({},{})", self.name, factor.label());
        MetricField {
            dim: self.dim,
            kind: FieldKind::Rescaled {
                base: Box::new(self.clone()),
                factor,
            },
            deriv_mode: DerivMode::FiniteDifference {
                step: DEFAULT_FD_STEP,
            },
            name,
        }
    }

    /// Switches the derivative mode. Closed form is only available for the
    /// built-in fields that define it.
    pub fn with_deriv_mode(mut self, mode: DerivMode) -> Result<Self> {
        if matches!(mode, DerivMode::ClosedForm) && !self.has_closed_form_derivs() {
            return Err(Error::InvalidArgument(format!(
                "field `{}` has no closed-form derivatives",
                self.name
            )));
        }
        self.deriv_mode = mode;
        Ok(self)
    }

    pub fn has_closed_form_derivs(&self) -> bool {
        matches!(self.kind, FieldKind::Euclidean | FieldKind::RoundSphere)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn deriv_mode(&self) -> DerivMode {
        self.deriv_mode
    }

    /// Chart-validity guard. All built-in fields cover the whole of R^n;
    /// only non-finite points are rejected.
    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|v| v.is_finite())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !self.in_domain(x) {
            return Err(Error::OutsideDomain(x.to_vec()));
        }
        Ok(())
    }

    /// Metric matrix at `x`.
    pub fn metric_at(&self, x: &[f64]) -> Result<SymMatrix> {
        self.check_point(x)?;
        match &self.kind {
            FieldKind::Euclidean => Ok(SymMatrix::identity(self.dim)),
            FieldKind::RoundSphere => {
                let omega = 2.0 / (1.0 + sq_norm(x));
                Ok(SymMatrix::scaled_identity(self.dim, omega * omega))
            }
            FieldKind::Rescaled { base, factor } => {
                let g = base.metric_at(x)?;
                let w = factor.omega_at(x)?;
                Ok(g.scale(w * w))
            }
        }
    }

    /// First and second coordinate derivatives of the metric:
    /// `dg(a,b,c) = d_c g_ab` and `ddg(a,b,c,d) = d_d d_c g_ab`.
    pub fn metric_derivs(&self, x: &[f64]) -> Result<(Tensor3, Tensor4)> {
        self.check_point(x)?;
        match self.deriv_mode {
            DerivMode::ClosedForm => self.closed_form_derivs(x),
            DerivMode::FiniteDifference { step } => self.finite_difference_derivs(x, step),
        }
    }

    fn closed_form_derivs(&self, x: &[f64]) -> Result<(Tensor3, Tensor4)> {
        let n = self.dim;
        match &self.kind {
            FieldKind::Euclidean => Ok((Tensor3::zeros(n), Tensor4::zeros(n))),
            FieldKind::RoundSphere => {
                // g_ab = omega^2 delta_ab with d_c omega = -x_c omega^2:
                //   d_c g_ab     = -2 x_c omega^3 delta_ab
                //   d_d d_c g_ab = (6 x_c x_d omega^4 - 2 delta_cd omega^3) delta_ab
                let omega = 2.0 / (1.0 + sq_norm(x));
                let w3 = omega * omega * omega;
                let w4 = w3 * omega;
                let dg = Tensor3::from_fn(n, |a, b, c| {
                    if a == b {
                        -2.0 * x[c] * w3
                    } else {
                        0.0
                    }
                });
                let ddg = Tensor4::from_fn(n, |a, b, c, d| {
                    if a == b {
                        6.0 * x[c] * x[d] * w4 - if c == d { 2.0 * w3 } else { 0.0 }
                    } else {
                        0.0
                    }
                });
                Ok((dg, ddg))
            }
            FieldKind::Rescaled { .. } => Err(Error::InvalidArgument(
                "rescaled fields have no closed-form derivatives".into(),
            )),
        }
    }

    fn finite_difference_derivs(&self, x: &[f64], step: f64) -> Result<(Tensor3, Tensor4)> {
        let n = self.dim;
        let h = scaled_step(step, x);
        let g0 = self.metric_at(x)?;

        let shifted = |offsets: &[(usize, f64)]| -> Result<SymMatrix> {
            let mut p = x.to_vec();
            for &(c, s) in offsets {
                p[c] += s;
            }
            self.metric_at(&p)
        };

        let mut plus = Vec::with_capacity(n);
        let mut minus = Vec::with_capacity(n);
        for c in 0..n {
            plus.push(shifted(&[(c, h)])?);
            minus.push(shifted(&[(c, -h)])?);
        }

        let mut dg = Tensor3::zeros(n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    dg.set(a, b, c, (plus[c].get(a, b) - minus[c].get(a, b)) / (2.0 * h));
                }
            }
        }

        let mut ddg = Tensor4::zeros(n);
        for c in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let second =
                        (plus[c].get(a, b) - 2.0 * g0.get(a, b) + minus[c].get(a, b)) / (h * h);
                    ddg.set(a, b, c, c, second);
                }
            }
        }
        for c in 0..n {
            for d in 0..c {
                let pp = shifted(&[(c, h), (d, h)])?;
                let pm = shifted(&[(c, h), (d, -h)])?;
                let mp = shifted(&[(c, -h), (d, h)])?;
                let mm = shifted(&[(c, -h), (d, -h)])?;
                for a in 0..n {
                    for b in 0..n {
                        let mixed = (pp.get(a, b) - pm.get(a, b) - mp.get(a, b) + mm.get(a, b))
                            / (4.0 * h * h);
                        ddg.set(a, b, c, d, mixed);
                        ddg.set(a, b, d, c, mixed);
                    }
                }
            }
        }

        Ok((dg, ddg))
    }
}
