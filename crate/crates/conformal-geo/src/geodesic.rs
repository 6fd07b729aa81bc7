//! The conformal geodesic ODE and its integrator.
//!
//! Three equivalent formulations of the same curve family are supported:
//!
//! - **A-form** (projective parameter tau, state `(x, V, A)`):
//!   `dA = 3 (V.A/V.V) A - (3 A.A / (2 V.V)) V + (V.V) P_b{}^a V^b - 2 P(V,V) V`
//! - **B-form** (projective parameter tau, state `(x, V, B)` with
//!   `B = A/(V.V) - 2 (V.A)/(V.V)^2 V`):
//!   `dB = (V.B) B - (B.B/2) V + P_b{}^a V^b`
//! - **C-form** (arc length t, state `(x, U, C)` with `U` unit and `C`
//!   orthogonal to `U`): `dC = P_b{}^a U^b - (C.C + P(U,U)) U`
//!
//! The displayed derivatives are directional covariant derivatives along
//! the curve; the right-hand sides below expand them into coordinate
//! derivatives plus Christoffel corrections so that a standard ODE
//! stepper can integrate chart coordinates directly.
//!
//! The integrator is an embedded Dormand-Prince 5(4) scheme with
//! per-component error control. Blowing up is not an error: acceleration,
//! position, or parameter passing their thresholds ends the run with a
//! diagnostic termination cause. C-form runs renormalize `U` and
//! re-orthogonalize `C` after every accepted step and report the largest
//! pre-projection drift.

use std::io::Write;

use serde::Serialize;

use crate::curvature::{christoffel, curvature_at, CurvatureAtPoint};
use crate::error::{Error, Result};
use crate::metric::{ConformalFactor, MetricField};
use crate::tensor::{inner, pairing, raise, Covector, SymMatrix, Vector};

/// Velocities with `V.V` at or below this are degenerate.
pub const EPS_V: f64 = 1e-10;

/// Construction-time tolerance on the C-form constraints.
pub const C_FORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    AForm,
    BForm,
    CForm,
}

impl Formulation {
    pub fn name(&self) -> &'static str {
        match self {
            Formulation::AForm => "a_form",
            Formulation::BForm => "b_form",
            Formulation::CForm => "c_form",
        }
    }
}

/// Why an integration run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    AccelerationBlowup,
    ParameterBlowup,
    LeftDomain,
    StepUnderflow,
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::AccelerationBlowup => "acceleration_blowup",
            Termination::ParameterBlowup => "parameter_blowup",
            Termination::LeftDomain => "left_domain",
            Termination::StepUnderflow => "step_underflow",
        }
    }
}

/// One point of a conformal geodesic: position, velocity, and the
/// acceleration of the active formulation, at a parameter value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicState {
    pub formulation: Formulation,
    pub x: Vec<f64>,
    pub vel: Vector,
    pub acc: Vector,
    pub param: f64,
}

impl GeodesicState {
    /// A-form state `(x, V, A)`; `V` must be nondegenerate under the
    /// field's metric at `x`.
    pub fn a_form(
        field: &MetricField,
        x: Vec<f64>,
        vel: Vector,
        acc: Vector,
        param: f64,
    ) -> Result<Self> {
        let state = GeodesicState {
            formulation: Formulation::AForm,
            x,
            vel,
            acc,
            param,
        };
        state.validate(field)?;
        Ok(state)
    }

    /// B-form state `(x, V, B)`.
    pub fn b_form(
        field: &MetricField,
        x: Vec<f64>,
        vel: Vector,
        acc: Vector,
        param: f64,
    ) -> Result<Self> {
        let state = GeodesicState {
            formulation: Formulation::BForm,
            x,
            vel,
            acc,
            param,
        };
        state.validate(field)?;
        Ok(state)
    }

    /// C-form state `(x, U, C)`; `U` must be unit and `C` orthogonal to
    /// `U` to within [`C_FORM_TOL`] under the field's metric at `x`.
    pub fn c_form(
        field: &MetricField,
        x: Vec<f64>,
        vel: Vector,
        acc: Vector,
        param: f64,
    ) -> Result<Self> {
        let state = GeodesicState {
            formulation: Formulation::CForm,
            x,
            vel,
            acc,
            param,
        };
        state.validate(field)?;
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Checks the formulation's constraints under the field's metric.
    pub fn validate(&self, field: &MetricField) -> Result<()> {
        if !self.param.is_finite() {
            return Err(Error::NonFinite);
        }
        let g = field.metric_at(&self.x)?;
        if self.vel.dim() != g.dim() || self.acc.dim() != g.dim() {
            return Err(Error::DimensionMismatch {
                expected: g.dim(),
                got: self.vel.dim(),
            });
        }
        match self.formulation {
            Formulation::AForm | Formulation::BForm => {
                let vv = inner(&g, &self.vel, &self.vel)?;
                if vv <= EPS_V {
                    return Err(Error::DegenerateVelocity(vv));
                }
            }
            Formulation::CForm => {
                let uu = inner(&g, &self.vel, &self.vel)?;
                let cu = inner(&g, &self.acc, &self.vel)?;
                let unit_defect = (uu - 1.0).abs();
                let ortho_defect = cu.abs();
                if unit_defect > C_FORM_TOL || ortho_defect > C_FORM_TOL {
                    return Err(Error::ConstraintViolation {
                        unit_defect,
                        ortho_defect,
                    });
                }
            }
        }
        Ok(())
    }
}

/// `B = A / (V.V) - 2 (V.A) / (V.V)^2 V`.
pub fn a_to_b(vel: &Vector, acc: &Vector, g: &SymMatrix) -> Result<Vector> {
    let vv = inner(g, vel, vel)?;
    if vv <= EPS_V {
        return Err(Error::DegenerateVelocity(vv));
    }
    let va = inner(g, vel, acc)?;
    Ok(acc.scale(1.0 / vv).add_scaled(vel, -2.0 * va / (vv * vv)))
}

/// Inverse of [`a_to_b`]: `A = (V.V) B - 2 (V.B) V`.
pub fn b_to_a(vel: &Vector, b: &Vector, g: &SymMatrix) -> Result<Vector> {
    let vv = inner(g, vel, vel)?;
    if vv <= EPS_V {
        return Err(Error::DegenerateVelocity(vv));
    }
    let vb = inner(g, vel, b)?;
    Ok(b.scale(vv).add_scaled(vel, -2.0 * vb))
}

/// Unit velocity and orthogonal acceleration induced by A-form data:
/// `U = V / sqrt(V.V)`, `C = A / (V.V) - (V.A) / (V.V)^2 V`.
pub fn c_form_from_a(vel: &Vector, acc: &Vector, g: &SymMatrix) -> Result<(Vector, Vector)> {
    let vv = inner(g, vel, vel)?;
    if vv <= EPS_V {
        return Err(Error::DegenerateVelocity(vv));
    }
    let va = inner(g, vel, acc)?;
    let u = vel.scale(1.0 / vv.sqrt());
    let c = acc.scale(1.0 / vv).add_scaled(vel, -va / (vv * vv));
    Ok((u, c))
}

/// Which acceleration notion [`rescale_acc`] transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccKind {
    A,
    B,
    C,
}

/// Transforms an acceleration to the conformally rescaled metric
/// `g_hat = omega^2 g`, with `upsilon_a = d_a log(omega)`:
///
/// ```text
/// A_hat^a = A^a - (V.V) Y^a + 2 (V.Y) V^a
/// B_hat_a = B_a - Y_a
/// C_hat_a = C_a - Y_a + (U.Y) U_a
/// ```
///
/// All raising and lowering uses the unhatted metric `g`.
pub fn rescale_acc(
    kind: AccKind,
    vel: &Vector,
    acc: &Vector,
    upsilon: &Covector,
    g: &SymMatrix,
) -> Result<Vector> {
    let g_inv = g.inverse()?;
    let upsilon_up = raise(&g_inv, upsilon)?;
    match kind {
        AccKind::A => {
            let vv = inner(g, vel, vel)?;
            let vy = pairing(upsilon, vel)?;
            Ok(acc
                .add_scaled(&upsilon_up, -vv)
                .add_scaled(vel, 2.0 * vy))
        }
        AccKind::B => Ok(acc.add_scaled(&upsilon_up, -1.0)),
        AccKind::C => {
            let uy = pairing(upsilon, vel)?;
            Ok(acc
                .add_scaled(&upsilon_up, -1.0)
                .add_scaled(vel, uy))
        }
    }
}

/// Rebuilds initial data valid for the rescaled metric `omega^2 g` from a
/// state on `g`, including the contravariant scalings the raw
/// [`rescale_acc`] formulas leave to the caller:
///
/// - A-form: `V` and tau unchanged, `A -> A_hat`;
/// - B-form: `V` unchanged, `B -> omega^-2 B_hat`;
/// - C-form: `U -> omega^-1 U`, `C -> omega^-2 C_hat`.
pub fn rescale_state(
    state: &GeodesicState,
    factor: &ConformalFactor,
    g: &SymMatrix,
) -> Result<GeodesicState> {
    let upsilon = factor.upsilon_at(&state.x)?;
    let omega = factor.omega_at(&state.x)?;
    let (vel, acc) = match state.formulation {
        Formulation::AForm => (
            state.vel.clone(),
            rescale_acc(AccKind::A, &state.vel, &state.acc, &upsilon, g)?,
        ),
        Formulation::BForm => (
            state.vel.clone(),
            rescale_acc(AccKind::B, &state.vel, &state.acc, &upsilon, g)?
                .scale(1.0 / (omega * omega)),
        ),
        Formulation::CForm => (
            state.vel.scale(1.0 / omega),
            rescale_acc(AccKind::C, &state.vel, &state.acc, &upsilon, g)?
                .scale(1.0 / (omega * omega)),
        ),
    };
    Ok(GeodesicState {
        formulation: state.formulation,
        x: state.x.clone(),
        vel,
        acc,
        param: state.param,
    })
}

/// A Moebius reparameterization `u -> (a u + b) / (c u + d)` of the
/// projective parameter, read as giving the old parameter in terms of
/// the new one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mobius {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mobius {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if a * d - b * c == 0.0 {
            return Err(Error::MobiusSingular);
        }
        Ok(Mobius { a, b, c, d })
    }

    pub fn identity() -> Self {
        Mobius {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 1.0,
        }
    }

    /// The reversal `u -> 1 - u`.
    pub fn reversal() -> Self {
        Mobius {
            a: -1.0,
            b: 1.0,
            c: 0.0,
            d: 1.0,
        }
    }

    pub fn apply(&self, u: f64) -> Result<f64> {
        let denom = self.c * u + self.d;
        if denom == 0.0 {
            return Err(Error::MobiusPole(u));
        }
        Ok((self.a * u + self.b) / denom)
    }

    pub fn deriv(&self, u: f64) -> Result<f64> {
        let denom = self.c * u + self.d;
        if denom == 0.0 {
            return Err(Error::MobiusPole(u));
        }
        Ok((self.a * self.d - self.b * self.c) / (denom * denom))
    }

    pub fn second_deriv(&self, u: f64) -> Result<f64> {
        let denom = self.c * u + self.d;
        if denom == 0.0 {
            return Err(Error::MobiusPole(u));
        }
        Ok(-2.0 * self.c * (self.a * self.d - self.b * self.c) / (denom * denom * denom))
    }

    /// Inverse map; also Moebius.
    pub fn inverse(&self) -> Mobius {
        Mobius {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }
}

/// Reparameterizes A-form initial data under a Moebius map `s` of the
/// preferred parameter, where `old = s(new)`. With `u0 = s^-1(old param)`
/// and `s'`, `s''` evaluated there:
///
/// ```text
/// V_hat = s' V,   A_hat = s'^2 A + s'' V
/// ```
///
/// The returned state generates the same point set.
pub fn mobius_reparam(init: &GeodesicState, m: &Mobius, g: &SymMatrix) -> Result<GeodesicState> {
    if init.formulation != Formulation::AForm {
        return Err(Error::InvalidArgument(
            "mobius_reparam expects A-form initial data".into(),
        ));
    }
    let new_param = m.inverse().apply(init.param)?;
    let sp = m.deriv(new_param)?;
    let spp = m.second_deriv(new_param)?;
    let vel = init.vel.scale(sp);
    let acc = init.acc.scale(sp * sp).add_scaled(&init.vel, spp);
    let vv = inner(g, &vel, &vel)?;
    if !vv.is_finite() || vv <= EPS_V {
        return Err(Error::DegenerateVelocity(vv));
    }
    Ok(GeodesicState {
        formulation: Formulation::AForm,
        x: init.x.clone(),
        vel,
        acc,
        param: new_param,
    })
}

/// Coordinate-derivative right-hand side shared by the public `rhs_*`
/// wrappers and the integrator. `vel`/`acc` carry (V, A), (V, B) or
/// (U, C) depending on the formulation.
fn rhs_core(
    formulation: Formulation,
    curv: &CurvatureAtPoint,
    vel: &Vector,
    acc: &Vector,
) -> Result<(Vector, Vector, Vector)> {
    let g = &curv.metric;
    match formulation {
        Formulation::AForm => {
            let vv = inner(g, vel, vel)?;
            if vv <= EPS_V {
                return Err(Error::DegenerateVelocity(vv));
            }
            let va = inner(g, vel, acc)?;
            let aa = inner(g, acc, acc)?;
            let p_v = curv.schouten_mixed_apply(vel);
            let pvv = curv.schouten_quad(vel, vel);
            let dx = vel.clone();
            let dvel = acc.add_scaled(&curv.gamma_apply(vel, vel), -1.0);
            let dacc = acc
                .scale(3.0 * va / vv)
                .add_scaled(vel, -1.5 * aa / vv)
                .add_scaled(&p_v, vv)
                .add_scaled(vel, -2.0 * pvv)
                .add_scaled(&curv.gamma_apply(vel, acc), -1.0);
            Ok((dx, dvel, dacc))
        }
        Formulation::BForm => {
            let vv = inner(g, vel, vel)?;
            if vv <= EPS_V {
                return Err(Error::DegenerateVelocity(vv));
            }
            let a = b_to_a(vel, acc, g)?;
            let vb = inner(g, vel, acc)?;
            let bb = inner(g, acc, acc)?;
            let p_v = curv.schouten_mixed_apply(vel);
            let dx = vel.clone();
            let dvel = a.add_scaled(&curv.gamma_apply(vel, vel), -1.0);
            let dacc = acc
                .scale(vb)
                .add_scaled(vel, -0.5 * bb)
                .add_scaled(&p_v, 1.0)
                .add_scaled(&curv.gamma_apply(vel, acc), -1.0);
            Ok((dx, dvel, dacc))
        }
        Formulation::CForm => {
            let cc = inner(g, acc, acc)?;
            let puu = curv.schouten_quad(vel, vel);
            let p_u = curv.schouten_mixed_apply(vel);
            let dx = vel.clone();
            let dvel = acc.add_scaled(&curv.gamma_apply(vel, vel), -1.0);
            let dacc = p_u
                .add_scaled(vel, -(cc + puu))
                .add_scaled(&curv.gamma_apply(vel, acc), -1.0);
            Ok((dx, dvel, dacc))
        }
    }
}

/// A-form right-hand side: `(dx, dV, dA)` as coordinate derivatives.
pub fn rhs_a(
    state: &GeodesicState,
    curv: &CurvatureAtPoint,
) -> Result<(Vector, Vector, Vector)> {
    if state.formulation != Formulation::AForm {
        return Err(Error::InvalidArgument("state is not A-form".into()));
    }
    rhs_core(Formulation::AForm, curv, &state.vel, &state.acc)
}

/// B-form right-hand side: `(dx, dV, dB)`.
pub fn rhs_b(
    state: &GeodesicState,
    curv: &CurvatureAtPoint,
) -> Result<(Vector, Vector, Vector)> {
    if state.formulation != Formulation::BForm {
        return Err(Error::InvalidArgument("state is not B-form".into()));
    }
    rhs_core(Formulation::BForm, curv, &state.vel, &state.acc)
}

/// C-form right-hand side: `(dx, dU, dC)`. The state must satisfy the
/// unit-velocity and orthogonality constraints to within [`C_FORM_TOL`].
pub fn rhs_c(
    state: &GeodesicState,
    curv: &CurvatureAtPoint,
) -> Result<(Vector, Vector, Vector)> {
    if state.formulation != Formulation::CForm {
        return Err(Error::InvalidArgument("state is not C-form".into()));
    }
    let g = &curv.metric;
    let uu = inner(g, &state.vel, &state.vel)?;
    let cu = inner(g, &state.acc, &state.vel)?;
    if (uu - 1.0).abs() > C_FORM_TOL || cu.abs() > C_FORM_TOL {
        return Err(Error::ConstraintViolation {
            unit_defect: (uu - 1.0).abs(),
            ortho_defect: cu.abs(),
        });
    }
    rhs_core(Formulation::CForm, curv, &state.vel, &state.acc)
}

/// Curvature data the geodesic RHS needs. In n = 2 the Schouten tensor is
/// undefined; the term is dropped there, which is exact on the flat plane
/// (the only 2-D chart these equations are used on).
pub fn geodesic_curvature(field: &MetricField, x: &[f64]) -> Result<CurvatureAtPoint> {
    if field.dim() >= 3 {
        curvature_at(field, x)
    } else {
        let gamma = christoffel(field, x)?;
        let mut flat = CurvatureAtPoint::flat(field.metric_at(x)?)?;
        flat.gamma = gamma;
        Ok(flat)
    }
}

/// Adaptive step control and blowup thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepControl {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub accel_limit: f64,
    pub position_limit: f64,
    pub param_limit: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            initial_step: 1e-3,
            min_step: 1e-12,
            max_step: 0.05,
            accel_limit: 1e8,
            position_limit: 1e8,
            param_limit: 1e6,
            max_steps: 2_000_000,
        }
    }
}

/// Ordered samples of one integration run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub metric_name: String,
    pub termination: Termination,
    /// Largest pre-projection constraint drift over all accepted steps of
    /// a C-form run; `None` for A/B runs.
    pub constraint_drift: Option<f64>,
    pub samples: Vec<GeodesicState>,
}

impl Trajectory {
    pub fn endpoint(&self) -> &GeodesicState {
        self.samples.last().expect("trajectory has samples")
    }

    pub fn dim(&self) -> usize {
        self.endpoint().dim()
    }

    /// Position at an arbitrary parameter value via per-interval cubic
    /// Hermite interpolation (positions and velocities at the sample
    /// endpoints). Returns `None` outside the sampled range.
    pub fn position_at(&self, param: f64) -> Option<Vec<f64>> {
        let samples = &self.samples;
        if samples.is_empty() {
            return None;
        }
        let first = samples.first().unwrap().param;
        let last = samples.last().unwrap().param;
        let ascending = last >= first;
        let (lo, hi) = if ascending { (first, last) } else { (last, first) };
        if param < lo - 1e-12 || param > hi + 1e-12 {
            return None;
        }
        let clamped = param.clamp(lo, hi);
        // Binary search for the bracketing interval.
        let mut a = 0;
        let mut b = samples.len() - 1;
        if b == 0 {
            return Some(samples[0].x.clone());
        }
        while b - a > 1 {
            let mid = (a + b) / 2;
            let pm = samples[mid].param;
            let before = if ascending {
                pm <= clamped
            } else {
                pm >= clamped
            };
            if before {
                a = mid;
            } else {
                b = mid;
            }
        }
        let s0 = &samples[a];
        let s1 = &samples[b];
        let h = s1.param - s0.param;
        if h == 0.0 {
            return Some(s0.x.clone());
        }
        let t = (clamped - s0.param) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Some(
            (0..s0.x.len())
                .map(|i| {
                    h00 * s0.x[i]
                        + h10 * h * s0.vel[i]
                        + h01 * s1.x[i]
                        + h11 * h * s1.vel[i]
                })
                .collect(),
        )
    }

    /// Speed `|vel|_g` and its parameter derivative `(V.A)/|V|_g` at each
    /// sample. The derivative uses the covariant acceleration, recovered
    /// from the stored B field for B-form runs; C-form speeds are
    /// identically one.
    fn speed_profile(&self, field: &MetricField) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.samples.len();
        let mut speeds = Vec::with_capacity(m);
        let mut dspeeds = Vec::with_capacity(m);
        for s in &self.samples {
            let g = field.metric_at(&s.x)?;
            let vv = inner(&g, &s.vel, &s.vel)?.max(0.0);
            let speed = vv.sqrt();
            let cov_acc = match s.formulation {
                Formulation::AForm => s.acc.clone(),
                Formulation::BForm => b_to_a(&s.vel, &s.acc, &g)?,
                Formulation::CForm => s.acc.clone(),
            };
            let dspeed = match s.formulation {
                Formulation::CForm => 0.0,
                _ => {
                    if speed > 0.0 {
                        inner(&g, &s.vel, &cov_acc)? / speed
                    } else {
                        0.0
                    }
                }
            };
            speeds.push(speed);
            dspeeds.push(dspeed);
        }
        Ok((speeds, dspeeds))
    }

    /// Cumulative metric arc length at each sample. Uses the
    /// derivative-corrected trapezoid rule
    /// `h/2 (f0 + f1) + h^2/12 (f0' - f1')`, which is exact for cubics,
    /// so the quadrature error is far below the integrator tolerance at
    /// the default step cap. For C-form runs this reproduces the
    /// parameter itself.
    pub fn arc_lengths(&self, field: &MetricField) -> Result<Vec<f64>> {
        let (speeds, dspeeds) = self.speed_profile(field)?;
        let mut out = Vec::with_capacity(self.samples.len());
        let mut acc = 0.0;
        out.push(0.0);
        for k in 1..self.samples.len() {
            let delta = self.samples[k].param - self.samples[k - 1].param;
            let dp = delta.abs();
            // In the direction of travel d(speed)/du picks up the sign of
            // the parameter step.
            acc += 0.5 * (speeds[k] + speeds[k - 1]) * dp
                + dp * dp / 12.0 * (dspeeds[k - 1] - dspeeds[k]) * delta.signum();
            out.push(acc);
        }
        Ok(out)
    }

    /// Positions at the requested arc-length values. Each query inverts
    /// the cubic Hermite model of arc length over one sample interval by
    /// Newton iteration and then interpolates the position there. Queries
    /// outside the sampled range yield `None`.
    pub fn resample_by_arc_length(
        &self,
        field: &MetricField,
        values: &[f64],
    ) -> Result<Vec<Option<Vec<f64>>>> {
        let (speeds, _) = self.speed_profile(field)?;
        let lengths = self.arc_lengths(field)?;
        let total = *lengths.last().unwrap_or(&0.0);
        let boundary = 1e-9 * total.max(1.0);
        let mut out = Vec::with_capacity(values.len());
        for &s in values {
            if s < -boundary || s > total + boundary {
                out.push(None);
                continue;
            }
            let s = s.clamp(0.0, total);
            // Arc length is strictly increasing in the sample index.
            let mut a = 0;
            let mut b = lengths.len() - 1;
            while b - a > 1 {
                let mid = (a + b) / 2;
                if lengths[mid] <= s {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let (p0, p1) = (self.samples[a].param, self.samples[b].param);
            let h = p1 - p0;
            if h == 0.0 {
                out.push(Some(self.samples[a].x.clone()));
                continue;
            }
            let sgn = h.signum();
            let (s0, s1) = (lengths[a], lengths[b]);
            let (f0, f1) = (speeds[a] * sgn, speeds[b] * sgn);
            // Hermite model of arc length as a function of the parameter;
            // for backward runs the parameter decreases while s grows.
            let model = |p: f64| {
                let t = (p - p0) / h;
                let (t2, t3) = (t * t, t * t * t);
                let value = (2.0 * t3 - 3.0 * t2 + 1.0) * s0
                    + (t3 - 2.0 * t2 + t) * h * f0
                    + (-2.0 * t3 + 3.0 * t2) * s1
                    + (t3 - t2) * h * f1;
                let deriv = ((6.0 * t2 - 6.0 * t) * s0
                    + (3.0 * t2 - 4.0 * t + 1.0) * h * f0
                    + (-6.0 * t2 + 6.0 * t) * s1
                    + (3.0 * t2 - 2.0 * t) * h * f1)
                    / h;
                (value, deriv)
            };
            let mut p = if s1 != s0 {
                p0 + h * (s - s0) / (s1 - s0)
            } else {
                p0
            };
            for _ in 0..8 {
                let (value, deriv) = model(p);
                if deriv.abs() < 1e-300 {
                    break;
                }
                let step = (value - s) / deriv;
                p -= step;
                if !p.is_finite() {
                    p = p0;
                    break;
                }
                if step.abs() <= 1e-15 * h.abs().max(1.0) {
                    break;
                }
            }
            let lo = p0.min(p1);
            let hi = p0.max(p1);
            out.push(self.position_at(p.clamp(lo, hi)));
        }
        Ok(out)
    }

    /// CSV rows `param,x_1..x_n,vel_1..vel_n,acc_1..acc_n`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.dim();
        let mut header = String::from("param");
        for prefix in ["x", "vel", "acc"] {
            for i in 1..=n {
                header.push_str(&format!(",{prefix}_{i}"));
            }
        }
        writeln!(w, "{header}")?;
        for s in &self.samples {
            let mut row = format!("{}", s.param);
            for v in &s.x {
                row.push_str(&format!(",{v}"));
            }
            for i in 0..n {
                row.push_str(&format!(",{}", s.vel[i]));
            }
            for i in 0..n {
                row.push_str(&format!(",{}", s.acc[i]));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

// Dormand-Prince 5(4). The RHS is autonomous, so the stage abscissae
// never enter; only the coupling matrix and the two weight rows do.
const DP_A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Rhs<'a> {
    field: &'a MetricField,
    formulation: Formulation,
    n: usize,
}

impl<'a> Rhs<'a> {
    fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let x = &y[..n];
        let vel = Vector::from_slice(&y[n..2 * n])?;
        let acc = Vector::from_slice(&y[2 * n..3 * n])?;
        let curv = geodesic_curvature(self.field, x)?;
        let (dx, dvel, dacc) = rhs_core(self.formulation, &curv, &vel, &acc)?;
        let mut out = Vec::with_capacity(3 * n);
        out.extend_from_slice(dx.components());
        out.extend_from_slice(dvel.components());
        out.extend_from_slice(dacc.components());
        Ok(out)
    }
}

fn euclid_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Integrates the conformal geodesic ODE from `init` to `param_end`.
///
/// The run ends at `param_end` (termination `Completed`) or earlier with
/// the diagnostic cause that stopped it. Samples are the accepted steps,
/// including the initial state and — for completed runs — `param_end`
/// itself. Backward runs (`param_end < init.param`) are supported; sample
/// parameters are then strictly decreasing.
pub fn integrate(
    field: &MetricField,
    init: &GeodesicState,
    param_end: f64,
    ctrl: &StepControl,
) -> Result<Trajectory> {
    init.validate(field)?;
    if !param_end.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = field.dim();
    let rhs = Rhs {
        field,
        formulation: init.formulation,
        n,
    };

    let mut samples = vec![init.clone()];
    let mut drift_max: Option<f64> = match init.formulation {
        Formulation::CForm => Some(0.0),
        _ => None,
    };

    let mut param = init.param;
    let mut y: Vec<f64> = Vec::with_capacity(3 * n);
    y.extend_from_slice(&init.x);
    y.extend_from_slice(init.vel.components());
    y.extend_from_slice(init.acc.components());

    let span = param_end - param;
    if span == 0.0 {
        return Ok(Trajectory {
            metric_name: field.name().to_owned(),
            termination: Termination::Completed,
            constraint_drift: drift_max,
            samples,
        });
    }
    let dir = span.signum();
    let mut h = ctrl.initial_step.abs().min(ctrl.max_step) * dir;

    let mut k1 = match rhs.eval(&y) {
        Ok(k) => k,
        Err(_) => {
            return Ok(Trajectory {
                metric_name: field.name().to_owned(),
                termination: Termination::LeftDomain,
                constraint_drift: drift_max,
                samples,
            })
        }
    };

    let mut stages: Vec<Vec<f64>> = vec![vec![0.0; 3 * n]; 7];
    let mut attempts = 0usize;
    let termination = loop {
        if attempts >= ctrl.max_steps {
            break Termination::StepUnderflow;
        }
        attempts += 1;
        {
            if (param - param_end).abs() == 0.0 {
                break Termination::Completed;
            }
            if h.abs() < ctrl.min_step {
                break Termination::StepUnderflow;
            }
            // Land exactly on param_end.
            if (param + h - param_end) * dir > 0.0 {
                h = param_end - param;
            }

            stages[0].copy_from_slice(&k1);
            let mut failed = false;
            for stage in 1..7 {
                let mut ytmp = y.clone();
                for (j, k) in stages.iter().enumerate().take(stage) {
                    let a = DP_A[stage - 1][j];
                    if a != 0.0 {
                        for i in 0..3 * n {
                            ytmp[i] += h * a * k[i];
                        }
                    }
                }
                match rhs.eval(&ytmp) {
                    Ok(k) => stages[stage] = k,
                    Err(_) => {
                        failed = true;
                        break;
                    }
                }
            }
            if failed {
                h *= 0.5;
                continue;
            }

            let mut y5 = y.clone();
            let mut err_norm_sq = 0.0;
            for i in 0..3 * n {
                let mut dy5 = 0.0;
                let mut dy4 = 0.0;
                for s in 0..7 {
                    dy5 += DP_B5[s] * stages[s][i];
                    dy4 += DP_B4[s] * stages[s][i];
                }
                y5[i] += h * dy5;
                let scale = ctrl.abs_tol + ctrl.rel_tol * y[i].abs().max(y5[i].abs());
                let e = h * (dy5 - dy4) / scale;
                err_norm_sq += e * e;
            }
            let err_norm = (err_norm_sq / (3 * n) as f64).sqrt();

            if !err_norm.is_finite() || err_norm > 1.0 {
                let factor = if err_norm.is_finite() {
                    (0.9 * err_norm.powf(-0.2)).max(0.2)
                } else {
                    0.2
                };
                h *= factor;
                continue;
            }

            // Accepted.
            param += h;
            y = y5;

            let mut state = GeodesicState {
                formulation: init.formulation,
                x: y[..n].to_vec(),
                vel: Vector::from_slice(&y[n..2 * n])?,
                acc: Vector::from_slice(&y[2 * n..3 * n])?,
                param,
            };

            if init.formulation == Formulation::CForm {
                match field.metric_at(&state.x) {
                    Ok(g) => {
                        let uu = inner(&g, &state.vel, &state.vel)?;
                        let cu = inner(&g, &state.acc, &state.vel)?;
                        let drift = (uu.sqrt() - 1.0).abs().max(cu.abs());
                        if let Some(d) = drift_max.as_mut() {
                            *d = d.max(drift);
                        }
                        let u = state.vel.scale(1.0 / uu.sqrt());
                        let cu_new = inner(&g, &state.acc, &u)?;
                        let c = state.acc.add_scaled(&u, -cu_new);
                        state.vel = u;
                        state.acc = c;
                        y[n..2 * n].copy_from_slice(state.vel.components());
                        y[2 * n..3 * n].copy_from_slice(state.acc.components());
                    }
                    Err(_) => {
                        break Termination::LeftDomain;
                    }
                }
            }

            samples.push(state.clone());

            if euclid_norm(state.acc.components()) > ctrl.accel_limit {
                break Termination::AccelerationBlowup;
            }
            if euclid_norm(&state.x) > ctrl.position_limit {
                break Termination::LeftDomain;
            }
            if param.abs() > ctrl.param_limit {
                break Termination::ParameterBlowup;
            }
            if !field.in_domain(&state.x) {
                break Termination::LeftDomain;
            }

            // FSAL: last stage is the derivative at the accepted point,
            // except that C-form projection invalidates it.
            if init.formulation == Formulation::CForm {
                match rhs.eval(&y) {
                    Ok(k) => k1 = k,
                    Err(_) => break Termination::LeftDomain,
                }
            } else {
                k1.copy_from_slice(&stages[6]);
            }

            let factor = (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0);
            h = dir * (h.abs() * factor).min(ctrl.max_step);
        }
    };

    Ok(Trajectory {
        metric_name: field.name().to_owned(),
        termination,
        constraint_drift: drift_max,
        samples,
    })
}
