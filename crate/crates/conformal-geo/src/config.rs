//! JSON experiment configuration for the `geo` CLI.
//!
//! The top-level object accepts the keys `metric`, `initial`, `range`,
//! `control`, `output`, `point`, `oracle`, `cone`, and `invariance`;
//! unknown keys anywhere in the document are rejected before any
//! computation runs. Which sections are required depends on the
//! subcommand; see the README for the full schema and examples.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geodesic::{Formulation, GeodesicState, Mobius, StepControl};
use crate::metric::{ConformalFactor, DerivMode, MetricField, DEFAULT_FD_STEP};
use crate::tensor::Vector;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub metric: Option<MetricSpec>,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub range: Option<RangeSpec>,
    #[serde(default)]
    pub control: Option<ControlSpec>,
    #[serde(default)]
    pub output: Option<OutputSpec>,
    /// Chart point for the `curvature` subcommand.
    #[serde(default)]
    pub point: Option<Vec<f64>>,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
    #[serde(default)]
    pub cone: Option<ConeSpec>,
    #[serde(default)]
    pub invariance: Option<InvarianceSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("config does not match schema: {e}")))
    }

    pub fn require_metric(&self) -> Result<&MetricSpec> {
        self.metric
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("config is missing `metric`".into()))
    }

    pub fn require_initial(&self) -> Result<&InitialSpec> {
        self.initial
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("config is missing `initial`".into()))
    }

    pub fn require_range(&self) -> Result<&RangeSpec> {
        self.range
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("config is missing `range`".into()))
    }

    pub fn step_control(&self) -> StepControl {
        self.control
            .as_ref()
            .map(ControlSpec::to_step_control)
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Euclidean,
    RoundSphere,
    Rescaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseMetricKind {
    Euclidean,
    RoundSphere,
}

/// `omega` rules available from configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaSpec {
    /// Constant positive factor.
    Constant { value: f64 },
    /// `2 / (1 + |x|^2)`, the factor that turns the Euclidean chart into
    /// the round sphere.
    RoundSphere,
}

impl OmegaSpec {
    pub fn build(&self) -> Result<ConformalFactor> {
        match self {
            OmegaSpec::Constant { value } => ConformalFactor::constant(*value),
            OmegaSpec::RoundSphere => Ok(ConformalFactor::round_sphere()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivModeSpec {
    ClosedForm,
    FiniteDifference,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub metric: MetricKind,
    pub dimension: usize,
    /// Base of a rescaled metric; defaults to Euclidean.
    #[serde(default)]
    pub base: Option<BaseMetricKind>,
    /// Conformal factor; required when `metric` is `rescaled`.
    #[serde(default)]
    pub omega: Option<OmegaSpec>,
    /// Derivative mode override; built-ins default to closed form.
    #[serde(default)]
    pub derivatives: Option<DerivModeSpec>,
    /// Step for finite-difference derivatives.
    #[serde(default)]
    pub fd_step: Option<f64>,
}

impl MetricSpec {
    pub fn build(&self) -> Result<MetricField> {
        let n = self.dimension;
        let field = match self.metric {
            MetricKind::Euclidean => MetricField::euclidean(n)?,
            MetricKind::RoundSphere => MetricField::round_sphere(n)?,
            MetricKind::Rescaled => {
                let omega = self.omega.as_ref().ok_or_else(|| {
                    Error::InvalidArgument("rescaled metric requires `omega`".into())
                })?;
                let base = match self.base.unwrap_or(BaseMetricKind::Euclidean) {
                    BaseMetricKind::Euclidean => MetricField::euclidean(n)?,
                    BaseMetricKind::RoundSphere => MetricField::round_sphere(n)?,
                };
                base.conformal_rescale(omega.build()?)
            }
        };
        match self.derivatives {
            None => Ok(field),
            Some(DerivModeSpec::ClosedForm) => field.with_deriv_mode(DerivMode::ClosedForm),
            Some(DerivModeSpec::FiniteDifference) => {
                field.with_deriv_mode(DerivMode::FiniteDifference {
                    step: self.fd_step.unwrap_or(DEFAULT_FD_STEP),
                })
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub formulation: Formulation,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub acceleration: Vec<f64>,
    #[serde(default)]
    pub param: f64,
}

impl InitialSpec {
    pub fn build(&self, field: &MetricField) -> Result<GeodesicState> {
        let vel = Vector::new(self.velocity.clone())?;
        let acc = Vector::new(self.acceleration.clone())?;
        match self.formulation {
            Formulation::AForm => {
                GeodesicState::a_form(field, self.position.clone(), vel, acc, self.param)
            }
            Formulation::BForm => {
                GeodesicState::b_form(field, self.position.clone(), vel, acc, self.param)
            }
            Formulation::CForm => {
                GeodesicState::c_form(field, self.position.clone(), vel, acc, self.param)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub end: f64,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    #[serde(default)]
    pub abs_tol: Option<f64>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub initial_step: Option<f64>,
    #[serde(default)]
    pub min_step: Option<f64>,
    #[serde(default)]
    pub max_step: Option<f64>,
    #[serde(default)]
    pub accel_limit: Option<f64>,
    #[serde(default)]
    pub position_limit: Option<f64>,
    #[serde(default)]
    pub param_limit: Option<f64>,
    #[serde(default)]
    pub max_steps: Option<usize>,
}

impl ControlSpec {
    pub fn to_step_control(&self) -> StepControl {
        let d = StepControl::default();
        StepControl {
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            initial_step: self.initial_step.unwrap_or(d.initial_step),
            min_step: self.min_step.unwrap_or(d.min_step),
            max_step: self.max_step.unwrap_or(d.max_step),
            accel_limit: self.accel_limit.unwrap_or(d.accel_limit),
            position_limit: self.position_limit.unwrap_or(d.position_limit),
            param_limit: self.param_limit.unwrap_or(d.param_limit),
            max_steps: self.max_steps.unwrap_or(d.max_steps),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: Option<OutputFormat>,
    #[serde(default)]
    pub path: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    EvalCircle {
        alpha: f64,
        beta: f64,
        #[serde(default = "default_oracle_dim")]
        dimension: usize,
        tau: f64,
    },
    CircleCenterRadius {
        alpha: f64,
        beta: f64,
        #[serde(default = "default_oracle_dim")]
        dimension: usize,
    },
    LineParam {
        alpha: f64,
        tau: f64,
    },
    LimitPoint {
        alpha: f64,
        beta: f64,
        #[serde(default = "default_oracle_dim")]
        dimension: usize,
    },
    EndpointSigma {
        alpha: f64,
        sigma: f64,
    },
}

fn default_oracle_dim() -> usize {
    2
}

fn default_sigmas() -> Vec<f64> {
    vec![-1.0, -0.5, 0.0, 0.5, 1.0]
}

fn default_alphas() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 1.5, 1.9, 1.99]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeSpec {
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
}

impl Default for ConeSpec {
    fn default() -> Self {
        ConeSpec {
            sigmas: default_sigmas(),
            alphas: default_alphas(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvarianceSpec {
    /// Conformal factor for the rescaled leg; defaults to the
    /// round-sphere factor.
    #[serde(default)]
    pub omega: Option<OmegaSpec>,
    /// Moebius coefficients `[a, b, c, d]`; defaults to the reversal.
    #[serde(default)]
    pub mobius: Option<[f64; 4]>,
    /// Pass/fail tolerance; defaults to `GEO_TOL` or 1e-5.
    #[serde(default)]
    pub tolerance: Option<f64>,
}

impl InvarianceSpec {
    pub fn factor(&self) -> Result<ConformalFactor> {
        match &self.omega {
            Some(spec) => spec.build(),
            None => Ok(ConformalFactor::round_sphere()),
        }
    }

    pub fn mobius_map(&self) -> Result<Mobius> {
        match self.mobius {
            Some([a, b, c, d]) => Mobius::new(a, b, c, d),
            None => Ok(Mobius::reversal()),
        }
    }
}
