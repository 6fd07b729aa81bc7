//! Conformal geodesics on Riemannian metric fields.
//!
//! The crate provides:
//!
//! - [`tensor`]: small dense vectors/covectors/symmetric matrices with
//!   metric-aware inner products and index raising/lowering;
//! - [`metric`]: metric fields on a chart with closed-form or
//!   finite-difference derivatives, plus conformal rescaling;
//! - [`curvature`]: Christoffel symbols, Ricci, scalar curvature, and the
//!   Schouten tensor at a point;
//! - [`geodesic`]: the conformal geodesic ODE in projective-parameter
//!   (A and B) and arc-length (C) formulations, acceleration conversions,
//!   Moebius reparameterization, and an adaptive embedded Runge-Kutta
//!   integrator;
//! - [`euclid`]: the closed-form family of conformal circles in Euclidean
//!   space used as an exact oracle;
//! - [`stereographic`]: the stereographic chart between R^n and the unit
//!   sphere, with chordal-distance diagnostics;
//! - [`config`] and [`run`]: the JSON experiment configuration and the
//!   command implementations behind the `geo` CLI.

pub mod config;
pub mod curvature;
pub mod error;
pub mod euclid;
pub mod geodesic;
pub mod metric;
pub mod run;
pub mod stereographic;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{inner, lower, pairing, raise, Covector, SymMatrix, Vector};
