//! Slower property checks on the integrator that go beyond the acceptance
//! gate: smooth dependence on initial data, termination-cause mapping,
//! and constraint drift bounds.

use conformal_geo::geodesic::{
    integrate, GeodesicState, StepControl, Termination,
};
use conformal_geo::metric::MetricField;
use conformal_geo::tensor::Vector;

fn vecn(c: &[f64]) -> Vector {
    Vector::from_slice(c).unwrap()
}

fn endpoint(field: &MetricField, alpha: f64, beta: f64) -> Vec<f64> {
    let init = GeodesicState::a_form(
        field,
        vec![0.0, 0.0],
        vecn(&[1.0, 0.0]),
        vecn(&[alpha, beta]),
        0.0,
    )
    .unwrap();
    let traj = integrate(field, &init, 1.0, &StepControl::default()).unwrap();
    assert_eq!(traj.termination, Termination::Completed);
    traj.endpoint().x.clone()
}

/// The endpoint at tau = 1 depends smoothly on (alpha, beta): central
/// finite-difference directional derivatives converge at second order,
/// so consecutive Richardson differences shrink by roughly 4x.
#[test]
fn endpoint_depends_smoothly_on_initial_acceleration() {
    let field = MetricField::euclidean(2).unwrap();
    let (alpha0, beta0) = (0.0, 1.0);
    for dir in [(1.0, 0.0), (0.0, 1.0), (0.7, -0.7)] {
        let deriv = |h: f64| -> Vec<f64> {
            let plus = endpoint(&field, alpha0 + h * dir.0, beta0 + h * dir.1);
            let minus = endpoint(&field, alpha0 - h * dir.0, beta0 - h * dir.1);
            plus.iter()
                .zip(&minus)
                .map(|(p, m)| (p - m) / (2.0 * h))
                .collect()
        };
        let h = 0.02;
        let d1 = deriv(h);
        let d2 = deriv(h / 2.0);
        let d3 = deriv(h / 4.0);
        for i in 0..2 {
            let coarse = d1[i] - d2[i];
            let fine = d2[i] - d3[i];
            if coarse.abs() < 1e-7 {
                // Direction barely moves this component; nothing to rate.
                continue;
            }
            let ratio = coarse / fine;
            assert!(
                (2.8..=5.5).contains(&ratio),
                "Richardson ratio {ratio} out of range for dir {dir:?}, component {i}"
            );
        }
    }
}

#[test]
fn position_limit_reports_left_domain() {
    let field = MetricField::euclidean(2).unwrap();
    let init = GeodesicState::a_form(
        &field,
        vec![0.0, 0.0],
        vecn(&[1.0, 0.0]),
        vecn(&[0.0, 0.0]),
        0.0,
    )
    .unwrap();
    let ctrl = StepControl {
        position_limit: 0.5,
        ..StepControl::default()
    };
    let traj = integrate(&field, &init, 1.0, &ctrl).unwrap();
    assert_eq!(traj.termination, Termination::LeftDomain);
}

#[test]
fn param_limit_reports_parameter_blowup() {
    let field = MetricField::euclidean(2).unwrap();
    let init = GeodesicState::a_form(
        &field,
        vec![0.0, 0.0],
        vecn(&[1.0, 0.0]),
        vecn(&[0.0, 0.0]),
        0.0,
    )
    .unwrap();
    let ctrl = StepControl {
        param_limit: 0.5,
        position_limit: 1e3,
        ..StepControl::default()
    };
    let traj = integrate(&field, &init, 1.0, &ctrl).unwrap();
    assert_eq!(traj.termination, Termination::ParameterBlowup);
}

#[test]
fn unreachable_tolerance_reports_step_underflow() {
    let field = MetricField::round_sphere(3).unwrap();
    let init = GeodesicState::a_form(
        &field,
        vec![0.1, 0.0, 0.0],
        vecn(&[1.0, 0.2, 0.0]),
        vecn(&[0.0, 1.0, 0.0]),
        0.0,
    )
    .unwrap();
    // A minimum step too coarse for the requested tolerance: every step
    // is rejected and the controller bottoms out.
    let ctrl = StepControl {
        abs_tol: 1e-16,
        rel_tol: 1e-16,
        min_step: 1e-2,
        initial_step: 1e-2,
        ..StepControl::default()
    };
    let traj = integrate(&field, &init, 1.0, &ctrl).unwrap();
    assert_eq!(traj.termination, Termination::StepUnderflow);
}

/// Pre-projection drift per accepted step stays below 1e-10 on C-form
/// runs at default tolerances.
#[test]
fn c_form_drift_is_bounded() {
    use conformal_geo::geodesic::c_form_from_a;
    for field in [
        MetricField::euclidean(3).unwrap(),
        MetricField::round_sphere(3).unwrap(),
    ] {
        let x0 = vec![0.2, -0.1, 0.3];
        let g = field.metric_at(&x0).unwrap();
        let (u, c) = c_form_from_a(&vecn(&[1.0, 0.4, -0.2]), &vecn(&[0.3, -0.8, 0.5]), &g).unwrap();
        let init = GeodesicState::c_form(&field, x0, u, c, 0.0).unwrap();
        let traj = integrate(&field, &init, 2.0, &StepControl::default()).unwrap();
        assert_eq!(traj.termination, Termination::Completed);
        let drift = traj.constraint_drift.unwrap();
        assert!(drift <= 1e-10, "drift {drift:.2e} in {}", field.name());
    }
}

/// B-form runs keep the projective parameter under conformal rescaling,
/// so positions agree at equal tau between the base and rescaled runs.
#[test]
fn b_form_conformal_invariance() {
    use conformal_geo::geodesic::{a_to_b, rescale_state};
    use conformal_geo::metric::ConformalFactor;

    let field = MetricField::euclidean(3).unwrap();
    let factor = ConformalFactor::round_sphere();
    let hat_field = field.conformal_rescale(factor.clone());
    let ctrl = StepControl::default();

    let x0 = vec![0.3, -0.2, 0.1];
    let g = field.metric_at(&x0).unwrap();
    let v = vecn(&[0.8, 0.4, -0.2]);
    let a = vecn(&[0.5, -0.3, 0.2]);
    let b = a_to_b(&v, &a, &g).unwrap();
    let init = GeodesicState::b_form(&field, x0.clone(), v, b, 0.0).unwrap();
    let hat_init = rescale_state(&init, &factor, &g).unwrap();

    let base = integrate(&field, &init, 1.0, &ctrl).unwrap();
    let hat = integrate(&hat_field, &hat_init, 1.0, &ctrl).unwrap();
    assert_eq!(base.termination, Termination::Completed);
    assert_eq!(hat.termination, Termination::Completed);
    for k in 0..=100 {
        let tau = k as f64 / 100.0;
        let pb = base.position_at(tau).unwrap();
        let ph = hat.position_at(tau).unwrap();
        let gap: f64 = pb
            .iter()
            .zip(&ph)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!(gap <= 1e-5, "gap {gap:.2e} at tau={tau}");
    }
}

/// An unaccelerated arc-length run from the chart origin heads for the
/// projection pole: the chart coordinates blow up near t = pi while the
/// spherical picture stays on one great circle throughout.
#[test]
fn great_circle_runs_out_of_the_chart_toward_the_pole() {
    use conformal_geo::stereographic::to_sphere;
    let field = MetricField::round_sphere(3).unwrap();
    let init = GeodesicState::c_form(
        &field,
        vec![0.0, 0.0, 0.0],
        vecn(&[0.5, 0.0, 0.0]),
        vecn(&[0.0, 0.0, 0.0]),
        0.0,
    )
    .unwrap();
    // Near t = pi the chart coordinates are ~1e6 and climbing steeply; a
    // position cap well inside f64 range gives the clean chart-exit
    // diagnosis (the default 1e8 cap is also reached only through heavy
    // cancellation in the huge chart components).
    let ctrl = StepControl {
        position_limit: 1e6,
        ..StepControl::default()
    };
    let traj = integrate(&field, &init, std::f64::consts::PI, &ctrl).unwrap();
    assert_eq!(traj.termination, Termination::LeftDomain);
    let last = traj.endpoint();
    assert!(
        last.param > std::f64::consts::PI - 1e-2,
        "stopped early at t={}",
        last.param
    );

    // Crossing the unit sphere of the chart happens at the quarter turn.
    let quarter = traj.position_at(std::f64::consts::FRAC_PI_2).unwrap();
    let r: f64 = quarter.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((r - 1.0).abs() <= 1e-5, "|x(pi/2)| = {r}");

    // Mapped to the sphere, every sample lies on the great circle in the
    // (x1, pole) plane.
    for s in &traj.samples {
        let p = to_sphere(&s.x).unwrap();
        assert!(p.coords()[1].abs() <= 1e-6);
        assert!(p.coords()[2].abs() <= 1e-6);
    }
}

/// Backward and forward runs of the same circle agree where they overlap
/// after arc-length resampling of the backward leg onto the forward one.
#[test]
fn reversal_retraces_the_same_arc() {
    use conformal_geo::geodesic::{mobius_reparam, Mobius};
    let field = MetricField::euclidean(2).unwrap();
    let g = field.metric_at(&[0.0, 0.0]).unwrap();
    let init = GeodesicState::a_form(
        &field,
        vec![0.0, 0.0],
        vecn(&[1.0, 0.0]),
        vecn(&[0.0, 1.0]),
        0.0,
    )
    .unwrap();
    let ctrl = StepControl::default();
    let forward = integrate(&field, &init, 1.0, &ctrl).unwrap();
    let reversed_init = mobius_reparam(&init, &Mobius::reversal(), &g).unwrap();
    let backward = integrate(&field, &reversed_init, 0.0, &ctrl).unwrap();
    assert_eq!(backward.termination, Termination::Completed);
    for k in 0..=100 {
        let u = k as f64 / 100.0;
        let p_new = backward.position_at(u).unwrap();
        let p_old = forward.position_at(1.0 - u).unwrap();
        let gap: f64 = p_new
            .iter()
            .zip(&p_old)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(gap <= 1e-7, "gap {gap:.2e} at u={u}");
    }
}
