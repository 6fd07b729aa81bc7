//! Implementations behind the `geo` CLI subcommands, exposed as library
//! functions so tests can drive them in-process.

use serde::Serialize;

use crate::config::{
    ConeSpec, ExperimentConfig, MetricKind, OracleSpec, OutputFormat,
};
use crate::curvature::curvature_at;
use crate::error::{Error, Result};
use crate::euclid;
use crate::geodesic::{
    integrate, mobius_reparam, rescale_state, Formulation, GeodesicState, Termination, Trajectory,
};
use crate::metric::MetricField;
use crate::stereographic::{to_sphere, SpherePoint};
use crate::tensor::Vector;

/// Default pass/fail tolerance for invariance reports; the `GEO_TOL`
/// environment variable (a decimal string) overrides it, and an explicit
/// `invariance.tolerance` in the config overrides both.
pub fn default_tolerance() -> Result<f64> {
    match std::env::var("GEO_TOL") {
        Ok(text) => text
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("GEO_TOL is not a number: {text:?}")))
            .and_then(|v| {
                if v.is_finite() && v > 0.0 {
                    Ok(v)
                } else {
                    Err(Error::InvalidArgument(format!(
                        "GEO_TOL must be positive, got {v}"
                    )))
                }
            }),
        Err(_) => Ok(1e-5),
    }
}

/// `geo curvature`: curvature package at a chart point, as pretty JSON.
pub fn cmd_curvature(cfg: &ExperimentConfig) -> Result<String> {
    let field = cfg.require_metric()?.build()?;
    let point = cfg
        .point
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("config is missing `point`".into()))?;
    let curv = curvature_at(&field, point)?;
    serde_json::to_string_pretty(&curv)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))
}

/// `geo integrate`: one trajectory from the configured initial data.
pub fn cmd_integrate(cfg: &ExperimentConfig) -> Result<Trajectory> {
    let field = cfg.require_metric()?.build()?;
    let init = cfg.require_initial()?.build(&field)?;
    let end = cfg.require_range()?.end;
    let ctrl = cfg.step_control();
    integrate(&field, &init, end, &ctrl)
}

pub fn render_trajectory(traj: &Trajectory, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => Ok(traj.to_csv_string()),
        OutputFormat::Json => serde_json::to_string_pretty(traj)
            .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}"))),
    }
}

/// `geo oracle`: closed-form evaluations, as pretty JSON.
pub fn cmd_oracle(cfg: &ExperimentConfig) -> Result<String> {
    let spec = cfg
        .oracle
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("config is missing `oracle`".into()))?;
    let value = match spec {
        OracleSpec::EvalCircle {
            alpha,
            beta,
            dimension,
            tau,
        } => {
            let p = euclid::CircleParams::new(*alpha, *beta, *dimension)?;
            serde_json::json!({ "point": euclid::eval_circle(&p, *tau)? })
        }
        OracleSpec::CircleCenterRadius {
            alpha,
            beta,
            dimension,
        } => {
            let p = euclid::CircleParams::new(*alpha, *beta, *dimension)?;
            let (center, radius) = euclid::circle_center_radius(&p)?;
            serde_json::json!({ "center": center, "radius": radius })
        }
        OracleSpec::LineParam { alpha, tau } => {
            serde_json::json!({ "x": euclid::line_param(*alpha, *tau)? })
        }
        OracleSpec::LimitPoint {
            alpha,
            beta,
            dimension,
        } => {
            let p = euclid::CircleParams::new(*alpha, *beta, *dimension)?;
            serde_json::json!({ "point": euclid::limit_point(&p)? })
        }
        OracleSpec::EndpointSigma { alpha, sigma } => {
            let point = euclid::endpoint_sigma(*alpha, *sigma)?;
            let norm = euclid::endpoint_sigma_norm(*alpha, *sigma)?;
            serde_json::json!({ "point": point, "norm": norm })
        }
    };
    serde_json::to_string_pretty(&value)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))
}

/// One cell of the cone experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ConeRow {
    pub sigma: f64,
    pub alpha: f64,
    pub endpoint: Vec<f64>,
    pub ep_norm: f64,
    pub pred_norm: f64,
    pub pole_dist: f64,
    pub err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeReport {
    pub dimension: usize,
    pub rows: Vec<ConeRow>,
}

impl ConeReport {
    /// CSV columns: `sigma,alpha,ep_1..ep_n,ep_norm,pred_norm,pole_dist,err`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("sigma,alpha");
        for i in 1..=self.dimension {
            out.push_str(&format!(",ep_{i}"));
        }
        out.push_str(",ep_norm,pred_norm,pole_dist,err\n");
        for row in &self.rows {
            out.push_str(&format!("{},{}", row.sigma, row.alpha));
            for v in &row.endpoint {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(
                ",{},{},{},{}\n",
                row.ep_norm, row.pred_norm, row.pole_dist, row.err
            ));
        }
        out
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))
    }
}

fn euclid_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sorted_dedup(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite grid values"));
    out.dedup();
    out
}

/// `geo cone`: integrates the flat-chart conformal geodesic with initial
/// data `V = e_1`, `A = (alpha, sigma (2 - alpha), 0, ...)` over
/// `tau in [0, 1]` for every grid cell, compares endpoints against the
/// closed-form endpoint law, and maps them through the stereographic
/// embedding to record chordal distances to the pole.
pub fn cmd_cone(cfg: &ExperimentConfig) -> Result<ConeReport> {
    let default_cone = ConeSpec::default();
    let spec = cfg.cone.as_ref().unwrap_or(&default_cone);

    let field = match &cfg.metric {
        Some(m) => {
            if m.metric != MetricKind::Euclidean {
                return Err(Error::InvalidArgument(
                    "the cone experiment runs in the flat chart; use a Euclidean metric".into(),
                ));
            }
            m.build()?
        }
        None => MetricField::euclidean(3)?,
    };
    let n = field.dim();
    let ctrl = cfg.step_control();

    let sigmas = sorted_dedup(&spec.sigmas);
    let alphas = sorted_dedup(&spec.alphas);
    for &sigma in &sigmas {
        if !(sigma.is_finite() && sigma.abs() <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cone requires |sigma| <= 1, got {sigma}"
            )));
        }
    }
    for &alpha in &alphas {
        if !(alpha.is_finite() && (0.0..2.0).contains(&alpha)) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
    }

    let north = SpherePoint::north_pole(n);
    let mut rows = Vec::with_capacity(sigmas.len() * alphas.len());
    for &sigma in &sigmas {
        for &alpha in &alphas {
            let mut vel = vec![0.0; n];
            vel[0] = 1.0;
            let mut acc = vec![0.0; n];
            acc[0] = alpha;
            acc[1] = sigma * (2.0 - alpha);
            let init = GeodesicState::a_form(
                &field,
                vec![0.0; n],
                Vector::new(vel)?,
                Vector::new(acc)?,
                0.0,
            )?;
            let traj = integrate(&field, &init, 1.0, &ctrl)?;
            if traj.termination != Termination::Completed {
                return Err(Error::InvalidArgument(format!(
                    "cone cell (sigma={sigma}, alpha={alpha}) terminated early: {}",
                    traj.termination.name()
                )));
            }
            let endpoint = traj.endpoint().x.clone();
            let ep_norm = euclid_norm(&endpoint);
            let mut predicted = euclid::endpoint_sigma(alpha, sigma)?;
            predicted.resize(n, 0.0);
            let pred_norm = euclid::endpoint_sigma_norm(alpha, sigma)?;
            let pole_dist = to_sphere(&endpoint)?.chordal_distance(&north);
            let err = endpoint
                .iter()
                .zip(&predicted)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            rows.push(ConeRow {
                sigma,
                alpha,
                endpoint,
                ep_norm,
                pred_norm,
                pole_dist,
                err,
            });
        }
    }
    Ok(ConeReport { dimension: n, rows })
}

/// Result of the invariance suite on one configured instance.
#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub conformal_max_deviation: f64,
    pub mobius_max_deviation: f64,
    pub double_reversal_exact: bool,
    pub tolerance: f64,
    pub pass: bool,
}

impl InvarianceReport {
    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))
    }
}

const COMPARISON_GRID: usize = 200;

fn max_position_deviation(
    a: &Trajectory,
    b: &Trajectory,
    param_of_b: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
) -> f64 {
    let mut max_dev: f64 = 0.0;
    for k in 0..=COMPARISON_GRID {
        let t = lo + (hi - lo) * (k as f64) / (COMPARISON_GRID as f64);
        let (Some(pa), Some(pb)) = (a.position_at(t), b.position_at(param_of_b(t))) else {
            continue;
        };
        let dev = pa
            .iter()
            .zip(&pb)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        max_dev = max_dev.max(dev);
    }
    max_dev
}

/// `geo invariance`: runs the conformal-invariance and Moebius-invariance
/// checks on the configured metric, factor, and initial data.
///
/// The conformal leg integrates the same A-form data under `g` and under
/// `omega^2 g` (with the transformed acceleration) and compares positions
/// at equal preferred parameter, which checks the point set and the
/// parameterization at once. The Moebius leg integrates reparameterized
/// initial data and compares against the original curve through the
/// parameter map.
pub fn cmd_invariance(cfg: &ExperimentConfig) -> Result<InvarianceReport> {
    let field = cfg.require_metric()?.build()?;
    let init = cfg.require_initial()?.build(&field)?;
    if init.formulation != Formulation::AForm {
        return Err(Error::InvalidArgument(
            "invariance checks run on A-form initial data".into(),
        ));
    }
    let end = cfg.require_range()?.end;
    let ctrl = cfg.step_control();

    let default_spec = crate::config::InvarianceSpec {
        omega: None,
        mobius: None,
        tolerance: None,
    };
    let spec = cfg.invariance.as_ref().unwrap_or(&default_spec);
    let tolerance = match spec.tolerance {
        Some(t) => t,
        None => default_tolerance()?,
    };
    let factor = spec.factor()?;
    let mobius = spec.mobius_map()?;

    let base = integrate(&field, &init, end, &ctrl)?;
    if base.termination != Termination::Completed {
        return Err(Error::InvalidArgument(format!(
            "base run terminated early: {}",
            base.termination.name()
        )));
    }

    // Conformal leg.
    let g0 = field.metric_at(&init.x)?;
    let hat_field = field.conformal_rescale(factor.clone());
    let hat_init = rescale_state(&init, &factor, &g0)?;
    let hat = integrate(&hat_field, &hat_init, end, &ctrl)?;
    if hat.termination != Termination::Completed {
        return Err(Error::InvalidArgument(format!(
            "rescaled run terminated early: {}",
            hat.termination.name()
        )));
    }
    let conformal_max_deviation =
        max_position_deviation(&base, &hat, |t| t, init.param, end);

    // Moebius leg: reparameterized data must retrace the same curve.
    let new_init = mobius_reparam(&init, &mobius, &g0)?;
    let new_end = mobius.inverse().apply(end)?;
    let reparam = integrate(&field, &new_init, new_end, &ctrl)?;
    if reparam.termination != Termination::Completed {
        return Err(Error::InvalidArgument(format!(
            "reparameterized run terminated early: {}",
            reparam.termination.name()
        )));
    }
    let (lo, hi) = if new_init.param <= new_end {
        (new_init.param, new_end)
    } else {
        (new_end, new_init.param)
    };
    let mobius_max_deviation = max_position_deviation(
        &reparam,
        &base,
        |u| mobius.apply(u).unwrap_or(f64::NAN),
        lo,
        hi,
    );

    let rev = crate::geodesic::Mobius::reversal();
    let double_reversal_exact = mobius_reparam(&mobius_reparam(&init, &rev, &g0)?, &rev, &g0)? == init;

    let pass = conformal_max_deviation <= tolerance
        && mobius_max_deviation <= tolerance
        && double_reversal_exact;
    Ok(InvarianceReport {
        conformal_max_deviation,
        mobius_max_deviation,
        double_reversal_exact,
        tolerance,
        pass,
    })
}
