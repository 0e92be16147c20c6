//! Browser bindings for the interactive demo page: each export runs one
//! desk-scale computation and returns a JSON document ready for plotting.

use hjb_core::barriers::{build_eps_subsolution, build_power_barriers};
use hjb_core::grid::{Grid, GridFunction};
use hjb_core::oracles::auxiliary::AuxiliarySolution;
use hjb_core::oracles::riccati::{riccati_solve, RiccatiProblem};
use hjb_core::problem::{PresetParams, ProblemSpec};
use hjb_core::scheme::{cfl_dt, step_explicit, SolveStatus};
use wasm_bindgen::prelude::*;

/// Separated blow-up trajectory `φ(t)` with the detected and
/// quadrature-predicted escape times.
#[wasm_bindgen]
pub fn riccati_trajectory(p: f64, rho: f64, horizon: f64) -> Result<String, JsError> {
    trajectory_json(p, rho, horizon).map_err(|e| JsError::new(&e))
}

pub fn trajectory_json(p: f64, rho: f64, horizon: f64) -> Result<String, String> {
    let prob = RiccatiProblem::new(p, rho, horizon).map_err(|e| e.to_string())?;
    let report = riccati_solve(&prob, 1e-3).map_err(|e| e.to_string())?;
    // thin the trajectory for transport; keep the steep tail
    let step = (report.trajectory.len() / 800).max(1);
    let points: Vec<(f64, f64)> = report
        .trajectory
        .iter()
        .step_by(step)
        .copied()
        .filter(|(_, phi)| phi.abs() < 50.0)
        .collect();
    Ok(serde_json::json!({
        "points": points,
        "tau": report.tau,
        "tau_quadrature": report.tau_from_quadrature,
        "threshold": report.quadrature_threshold,
        "product": rho * prob.p_conj,
    })
    .to_string())
}

/// Evolves the power-model preset under barrier boundary data and returns
/// the profile together with the evaluated barrier envelope.
#[wasm_bindgen]
pub fn solution_envelope(
    p: f64,
    extent: f64,
    nodes: u32,
    t_fraction: f64,
) -> Result<String, JsError> {
    envelope_json(p, extent, nodes as usize, t_fraction).map_err(|e| JsError::new(&e))
}

pub fn envelope_json(
    p: f64,
    extent: f64,
    nodes: usize,
    t_fraction: f64,
) -> Result<String, String> {
    let spec = ProblemSpec::from_preset(
        "power_model",
        &PresetParams {
            p: Some(p),
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let (lower, upper) = build_power_barriers(&spec).map_err(|e| e.to_string())?;
    let envelope_sub = build_eps_subsolution(&spec, 0.3).map_err(|e| e.to_string())?;
    let horizon = (spec.horizon.min(lower.tau_valid) * t_fraction.clamp(0.01, 1.0)).max(1e-4);
    let grid = Grid::new(vec![extent], vec![nodes.clamp(31, 801)], horizon)
        .map_err(|e| e.to_string())?;
    let mut state = GridFunction::from_fn(grid.clone(), 0.0, |x| (spec.initial)(x));
    let boundary = upper.boundary_condition();
    while horizon - state.time > 1e-12 * horizon {
        let dt = cfl_dt(&spec, &state)
            .map_err(|e| e.to_string())?
            .min(horizon - state.time);
        state = step_explicit(&spec, &state, dt, &boundary).map_err(|e| e.to_string())?;
    }
    let t = state.time;
    let mut x = Vec::new();
    let mut u = Vec::new();
    let mut sub = Vec::new();
    let mut sup = Vec::new();
    let mut eps_sub = Vec::new();
    for i in 0..grid.node_count() {
        let point = grid.point(i);
        x.push(point[0]);
        u.push(state.values[i]);
        sub.push(lower.value(&point, t));
        sup.push(upper.value(&point, t));
        eps_sub.push(envelope_sub.value(&point, t));
    }
    Ok(serde_json::json!({
        "time": t,
        "x": x,
        "u": u,
        "barrier_sub": sub,
        "barrier_super": sup,
        "envelope_sub": eps_sub,
    })
    .to_string())
}

/// Radial sections of the auxiliary parabolic family at one time.
#[wasm_bindgen]
pub fn auxiliary_curve(r_level: f64, t: f64, r_max: f64, points: u32) -> Result<String, JsError> {
    auxiliary_json(r_level, t, r_max, points as usize).map_err(|e| JsError::new(&e))
}

pub fn auxiliary_json(r_level: f64, t: f64, r_max: f64, points: usize) -> Result<String, String> {
    let sol = AuxiliarySolution::new(r_level, 512).map_err(|e| e.to_string())?;
    let n = points.clamp(16, 2000);
    let mut r = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    let mut ramp = Vec::with_capacity(n);
    let mut deriv = Vec::with_capacity(n);
    for i in 0..n {
        let radius = r_max * i as f64 / (n - 1) as f64;
        let jet = sol.jet(radius, t.max(1e-6)).map_err(|e| e.to_string())?;
        r.push(radius);
        phi.push(jet.value);
        ramp.push((radius - r_level).max(0.0));
        deriv.push(jet.d_r);
    }
    Ok(serde_json::json!({
        "r": r,
        "phi": phi,
        "ramp": ramp,
        "derivative": deriv,
        "derivative_cap": t.max(1e-6).exp(),
    })
    .to_string())
}

/// Short summary line for the page footer: status of a small truncated
/// first-order run, demonstrating the bounded-truncation behavior.
#[wasm_bindgen]
pub fn truncation_note(horizon: f64) -> Result<String, JsError> {
    truncation_json(horizon).map_err(|e| JsError::new(&e))
}

pub fn truncation_json(horizon: f64) -> Result<String, String> {
    let spec = ProblemSpec::from_preset(
        "lp_deterministic",
        &PresetParams {
            horizon: Some(horizon.clamp(0.5, 10.0)),
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let grid = Grid::new(vec![2.0], vec![201], spec.horizon).map_err(|e| e.to_string())?;
    let init = GridFunction::from_fn(grid, 0.0, |x| (spec.initial)(x));
    let out = hjb_core::scheme::solve(
        &spec,
        init,
        &hjb_core::scheme::BoundaryCondition::Extrapolate,
    )
    .map_err(|e| e.to_string())?;
    let status = match out.status {
        SolveStatus::Completed => "completed",
        SolveStatus::BlewUp { .. } => "blew_up",
        SolveStatus::CflViolation { .. } => "cfl_violation",
    };
    Ok(serde_json::json!({
        "status": status,
        "final_max_norm": out.final_state.max_norm(),
        "steps": out.steps,
    })
    .to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_payload_carries_the_anchor_tau() {
        let doc: serde_json::Value =
            serde_json::from_str(&trajectory_json(2.0, 0.0, 5.0).unwrap()).unwrap();
        let tau = doc["tau"].as_f64().unwrap();
        assert!((tau - 3.0).abs() < 1e-3);
        assert!(doc["points"].as_array().unwrap().len() > 50);
    }

    #[test]
    fn envelope_payload_sandwiches_the_solution() {
        let doc: serde_json::Value =
            serde_json::from_str(&envelope_json(2.0, 2.0, 101, 0.8).unwrap()).unwrap();
        let u = doc["u"].as_array().unwrap();
        let lo = doc["barrier_sub"].as_array().unwrap();
        let hi = doc["barrier_super"].as_array().unwrap();
        for i in 0..u.len() {
            let (u, lo, hi) = (
                u[i].as_f64().unwrap(),
                lo[i].as_f64().unwrap(),
                hi[i].as_f64().unwrap(),
            );
            assert!(lo - 1e-9 <= u && u <= hi + 1e-9);
        }
    }

    #[test]
    fn auxiliary_payload_respects_the_ramp_and_derivative_cap() {
        let doc: serde_json::Value =
            serde_json::from_str(&auxiliary_json(1.0, 0.5, 3.0, 64).unwrap()).unwrap();
        let phi = doc["phi"].as_array().unwrap();
        let ramp = doc["ramp"].as_array().unwrap();
        let cap = doc["derivative_cap"].as_f64().unwrap();
        for i in 0..phi.len() {
            assert!(phi[i].as_f64().unwrap() >= ramp[i].as_f64().unwrap() - 1e-9);
        }
        for d in doc["derivative"].as_array().unwrap() {
            assert!(d.as_f64().unwrap() <= cap + 1e-8);
        }
    }

    #[test]
    fn truncation_note_reports_a_bounded_run() {
        let doc: serde_json::Value =
            serde_json::from_str(&truncation_json(5.0).unwrap()).unwrap();
        assert_eq!(doc["status"], "completed");
        assert!(doc["final_max_norm"].as_f64().unwrap() < 100.0);
    }
}
