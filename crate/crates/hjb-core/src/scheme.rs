//! Monotone explicit finite-difference evolution of the model equation
//! `u_t − Tr(σσᵀD²u) + ⟨b,Du⟩ + f(x,t,u,sDu) = 0` (and of the controlled
//! form through extended-real Hamiltonian evaluation) on truncated
//! rectangular domains.
//!
//! Monotonicity is what carries the discrete comparison principle, so every
//! term is discretized accordingly: central second differences with
//! nonnegative diagonal diffusion, drift upwinded by its sign, and the
//! convex gradient nonlinearity fed by a per-axis Godunov selection — the
//! endpoint maximizing `f` when the one-sided slopes cross (shock side),
//! the minimizer over the slope interval otherwise. Off-diagonal diffusion
//! or gradient-weight coupling in dimension 2 is rejected: central
//! cross-difference stencils would break monotonicity. Initial data are
//! assumed continuous; discontinuous data are out of scope.

use crate::extended::ExtendedReal;
use crate::grid::{GridError, GridFunction};
use crate::hamiltonian::{hamiltonian_eval, HamiltonianError};
use crate::problem::{Nonlinearity, ProblemSpec, SpaceTimeScalarFn};
use crate::util::{golden_min, Mat};
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("time step {dt} exceeds the monotonicity bound {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("non-finite value produced at t = {at_time}")]
    NonFiniteValue { at_time: f64 },
    #[error("unsupported coupling: {0}")]
    UnsupportedCoupling(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
}

/// How boundary nodes are filled after each step.
pub enum BoundaryCondition {
    /// Keep the values the evolution started from.
    Frozen,
    /// Prescribed data, e.g. a certified barrier or an exact solution.
    Dirichlet(SpaceTimeScalarFn),
    /// One-sided interior stencils at the boundary nodes; no outside data.
    /// Meant for first-order blow-up runs where every Dirichlet choice is
    /// eventually wrong.
    Extrapolate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolveStatus {
    Completed,
    BlewUp { tau_num: f64 },
    CflViolation { at_time: f64 },
}

pub struct SolveOutcome {
    pub final_state: GridFunction,
    pub status: SolveStatus,
    pub max_norm_history: Vec<f64>,
    pub steps: usize,
}

impl SolveOutcome {
    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            #[serde(flatten)]
            status: &'a SolveStatus,
            steps: usize,
            final_time: f64,
            max_norm_history: &'a [f64],
        }
        serde_json::to_string_pretty(&Summary {
            status: &self.status,
            steps: self.steps,
            final_time: self.final_state.time,
            max_norm_history: &self.max_norm_history,
        })
        .expect("summary serializes")
    }
}

/// Diagonal of `σσᵀ(x,t)`, rejecting off-diagonal coupling in dimension 2.
fn diffusion_diag(spec: &ProblemSpec, x: &[f64], t: f64) -> Result<Vec<f64>, SchemeError> {
    let gram = spec.model_diffusion_gram(x, t);
    let n = gram.rows;
    if n == 2 {
        let off = gram.get(0, 1).abs().max(gram.get(1, 0).abs());
        let scale = gram.get(0, 0).abs().max(gram.get(1, 1).abs()).max(1.0);
        if off > 1e-12 * scale {
            return Err(SchemeError::UnsupportedCoupling(
                "off-diagonal diffusion in dimension 2".into(),
            ));
        }
    }
    Ok((0..n).map(|k| gram.get(k, k)).collect())
}

fn weight_diag(spec: &ProblemSpec, x: &[f64], t: f64) -> Result<Vec<f64>, SchemeError> {
    let s = (spec.gradient_weight)(x, t);
    let n = s.rows;
    if n == 2 {
        let off = s.get(0, 1).abs().max(s.get(1, 0).abs());
        if off > 1e-12 * s.frobenius_norm().max(1.0) {
            return Err(SchemeError::UnsupportedCoupling(
                "off-diagonal gradient weight in dimension 2".into(),
            ));
        }
    }
    Ok((0..n).map(|k| s.get(k, k)).collect())
}

/// One-sided differences of `u` at the node with flat index `i`.
/// At domain faces both entries fall back to the available side and the
/// second difference is reported as zero.
struct Stencil {
    backward: Vec<f64>,
    forward: Vec<f64>,
    second: Vec<f64>,
    interior: Vec<bool>,
}

fn stencil(u: &GridFunction, flat: usize) -> Stencil {
    let grid = &u.grid;
    let idx = grid.unflatten(flat);
    let mut st = Stencil {
        backward: Vec::with_capacity(grid.dim),
        forward: Vec::with_capacity(grid.dim),
        second: Vec::with_capacity(grid.dim),
        interior: Vec::with_capacity(grid.dim),
    };
    for k in 0..grid.dim {
        let h = grid.mesh(k);
        let n = grid.nodes[k];
        let here = u.values[flat];
        let stride = if k == 0 { 1 } else { grid.nodes[0] };
        let (bwd, fwd, second, interior) = if idx[k] == 0 {
            let f = (u.values[flat + stride] - here) / h;
            (f, f, 0.0, false)
        } else if idx[k] == n - 1 {
            let b = (here - u.values[flat - stride]) / h;
            (b, b, 0.0, false)
        } else {
            let um = u.values[flat - stride];
            let up = u.values[flat + stride];
            (
                (here - um) / h,
                (up - here) / h,
                (up - 2.0 * here + um) / (h * h),
                true,
            )
        };
        st.backward.push(bwd);
        st.forward.push(fwd);
        st.second.push(second);
        st.interior.push(interior);
    }
    st
}

/// Godunov selection of the gradient argument for the convex nonlinearity.
///
/// Power-form nonlinearities depend on each slot only through `|z_k|`, so
/// the selection is closed-form; custom convex nonlinearities use endpoint
/// comparison on the shock side and golden-section minimization on the
/// rarefaction side, holding the other components at their chosen values.
fn godunov_gradient(
    nonlinearity: &Nonlinearity,
    x: &[f64],
    t: f64,
    u: f64,
    weights: &[f64],
    st: &Stencil,
) -> Vec<f64> {
    let dim = weights.len();
    match nonlinearity {
        Nonlinearity::PowerForm { weight, .. } => {
            let mut z = Vec::with_capacity(dim);
            for k in 0..dim {
                let (qm, qp) = (st.backward[k], st.forward[k]);
                let (zm, zp) = (weights[k] * qm, weights[k] * qp);
                let zk = if *weight == 0.0 {
                    0.0
                } else if qm > qp {
                    // shock side: the larger magnitude maximizes f
                    if zm.abs() >= zp.abs() {
                        zm
                    } else {
                        zp
                    }
                } else if zm * zp <= 0.0 {
                    0.0
                } else if zm.abs() <= zp.abs() {
                    zm
                } else {
                    zp
                };
                z.push(zk);
            }
            z
        }
        Nonlinearity::Custom(_) => {
            // start from the averaged slope, then one ext pass per axis
            let mut z: Vec<f64> = (0..dim)
                .map(|k| weights[k] * 0.5 * (st.backward[k] + st.forward[k]))
                .collect();
            for k in 0..dim {
                let (qm, qp) = (st.backward[k], st.forward[k]);
                let eval = |q: f64, z: &mut Vec<f64>| {
                    z[k] = weights[k] * q;
                    nonlinearity.eval(x, t, u, z)
                };
                let chosen = if qm > qp {
                    let fm = eval(qm, &mut z);
                    let fp = eval(qp, &mut z);
                    if fm >= fp {
                        qm
                    } else {
                        qp
                    }
                } else {
                    let h_scale = (qp - qm).abs().max(1.0);
                    golden_min(qm, qp, 1e-12 * h_scale, |q| eval(q, &mut z))
                };
                z[k] = weights[k] * chosen;
            }
            z
        }
    }
}

/// Largest time step keeping the explicit update monotone on the current
/// iterate: the reciprocal of the summed stencil sensitivities
/// `Σ_k (2·max σσᵀ_kk/h_k² + max|b_k|/h_k + max slope_k/h_k)` plus the
/// `u`-Lipschitz constant of `f`, capped at `T/100`. The nonlinearity slope
/// is taken at the extreme one-sided gradient values of the iterate, where
/// a convex function's steepness over the sampled interval is attained.
pub fn cfl_dt(spec: &ProblemSpec, current: &GridFunction) -> Result<f64, SchemeError> {
    let grid = &current.grid;
    let t = current.time;
    let dim = grid.dim;
    let mut max_diag = vec![0.0f64; dim];
    let mut max_drift = vec![0.0f64; dim];
    let mut max_slope = vec![0.0f64; dim];

    let controlled = spec.is_controlled();
    for i in 0..grid.node_count() {
        let x = grid.point(i);
        let st = stencil(current, i);
        if controlled {
            // sensitivity of the extended-real Hamiltonian in each slot
            let hess = hessian_from(&st, dim);
            for k in 0..dim {
                for q in [st.backward[k], st.forward[k]] {
                    let slope = hamiltonian_slope(spec, &x, t, q, &hess, k)?;
                    max_slope[k] = max_slope[k].max(slope);
                }
            }
        } else {
            let diag = diffusion_diag(spec, &x, t)?;
            let b = spec.model_drift(&x, t);
            let weights = weight_diag(spec, &x, t)?;
            for k in 0..dim {
                max_diag[k] = max_diag[k].max(diag[k]);
                max_drift[k] = max_drift[k].max(b[k].abs());
                let z_extreme: Vec<f64> = (0..dim)
                    .map(|j| {
                        weights[j]
                            * if st.backward[j].abs() >= st.forward[j].abs() {
                                st.backward[j]
                            } else {
                                st.forward[j]
                            }
                    })
                    .collect();
                let slope =
                    nonlinearity_slope(&spec.nonlinearity, &x, t, &z_extreme, k, spec.p_conj)
                        * weights[k].abs();
                max_slope[k] = max_slope[k].max(slope);
            }
        }
    }

    let u_lipschitz = match &spec.nonlinearity {
        Nonlinearity::PowerForm { u_coeff, .. } => u_coeff.abs(),
        Nonlinearity::Custom(_) => spec.constants.c_hat,
    };
    let mut denominator = u_lipschitz;
    for k in 0..dim {
        let h = grid.mesh(k);
        denominator += 2.0 * max_diag[k] / (h * h) + max_drift[k] / h + max_slope[k] / h;
    }
    let cap = grid.horizon / 100.0;
    if denominator <= 0.0 {
        return Ok(cap);
    }
    Ok((1.0 / denominator).min(cap))
}

fn hessian_from(st: &Stencil, dim: usize) -> Mat {
    let mut hess = Mat::zeros(dim, dim);
    for k in 0..dim {
        hess.set(k, k, st.second[k]);
    }
    hess
}

fn hamiltonian_slope(
    spec: &ProblemSpec,
    x: &[f64],
    t: f64,
    q: f64,
    hess: &Mat,
    axis: usize,
) -> Result<f64, SchemeError> {
    let delta = 1e-4 * (1.0 + q.abs());
    let mut qv = vec![0.0; x.len()];
    qv[axis] = q + delta;
    let hi = hamiltonian_eval(spec, x, t, &qv, hess)?;
    qv[axis] = q - delta;
    let lo = hamiltonian_eval(spec, x, t, &qv, hess)?;
    match (hi, lo) {
        (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => {
            Ok(((a - b) / (2.0 * delta)).abs())
        }
        _ => Err(SchemeError::NonFiniteValue { at_time: t }),
    }
}

fn nonlinearity_slope(
    nonlinearity: &Nonlinearity,
    x: &[f64],
    t: f64,
    z: &[f64],
    axis: usize,
    p_conj: f64,
) -> f64 {
    match nonlinearity {
        Nonlinearity::PowerForm {
            weight, exponent, ..
        } => {
            let zn = crate::util::norm(z);
            let _ = p_conj;
            weight.abs() * exponent * zn.powf(exponent - 1.0)
        }
        Nonlinearity::Custom(f) => {
            let delta = 1e-4 * (1.0 + z[axis].abs());
            let mut zz = z.to_vec();
            zz[axis] = z[axis] + delta;
            let hi = f(x, t, 0.0, &zz);
            zz[axis] = z[axis] - delta;
            let lo = f(x, t, 0.0, &zz);
            // headroom for curvature between the probe and the true extreme
            1.2 * ((hi - lo) / (2.0 * delta)).abs()
        }
    }
}

/// One explicit step of length `dt` from `u_n`. Fails when `dt` exceeds the
/// monotonicity bound.
pub fn step_explicit(
    spec: &ProblemSpec,
    u_n: &GridFunction,
    dt: f64,
    boundary: &BoundaryCondition,
) -> Result<GridFunction, SchemeError> {
    let limit = cfl_dt(spec, u_n)?;
    if dt > limit * (1.0 + 1e-9) {
        return Err(SchemeError::CflViolation { dt, limit });
    }
    step_unchecked(spec, u_n, dt, boundary)
}

fn step_unchecked(
    spec: &ProblemSpec,
    u_n: &GridFunction,
    dt: f64,
    boundary: &BoundaryCondition,
) -> Result<GridFunction, SchemeError> {
    let grid = Arc::clone(&u_n.grid);
    let t = u_n.time;
    let t_next = t + dt;
    let mut values = vec![0.0; grid.node_count()];
    let controlled = spec.is_controlled();

    for i in 0..grid.node_count() {
        let boundary_node = grid.is_boundary(i);
        if boundary_node {
            match boundary {
                BoundaryCondition::Frozen => {
                    values[i] = u_n.values[i];
                    continue;
                }
                BoundaryCondition::Dirichlet(g) => {
                    values[i] = g(&grid.point(i), t_next);
                    continue;
                }
                BoundaryCondition::Extrapolate => { /* falls through to the update */ }
            }
        }
        let x = grid.point(i);
        let here = u_n.values[i];
        let st = stencil(u_n, i);

        let rate = if controlled {
            let hess = hessian_from(&st, grid.dim);
            let q_star = godunov_hamiltonian(spec, &x, t, &hess, &st)?;
            let h_val = match hamiltonian_eval(spec, &x, t, &q_star, &hess)? {
                ExtendedReal::Finite(v) => v,
                ExtendedReal::PosInfinity => {
                    return Err(SchemeError::NonFiniteValue { at_time: t })
                }
            };
            let weights = weight_diag(spec, &x, t)?;
            let z: Vec<f64> = (0..grid.dim).map(|k| weights[k] * q_star[k]).collect();
            h_val + spec.nonlinearity.eval(&x, t, here, &z)
        } else {
            let diag = diffusion_diag(spec, &x, t)?;
            let b = spec.model_drift(&x, t);
            let weights = weight_diag(spec, &x, t)?;
            let mut g = 0.0;
            for k in 0..grid.dim {
                g -= diag[k] * st.second[k];
                // upwind by drift sign: the spatial difference whose
                // neighbor dependence keeps the update nondecreasing
                g += b[k]
                    * if b[k] >= 0.0 {
                        st.backward[k]
                    } else {
                        st.forward[k]
                    };
            }
            let z = godunov_gradient(&spec.nonlinearity, &x, t, here, &weights, &st);
            g + spec.nonlinearity.eval(&x, t, here, &z)
        };

        values[i] = here - dt * rate;
    }

    Ok(GridFunction {
        grid,
        values,
        time: t_next,
    })
}

/// Godunov selection in the gradient slot of the controlled Hamiltonian
/// (one-dimensional; the map `q ↦ H(x,t,q,X)` is convex).
fn godunov_hamiltonian(
    spec: &ProblemSpec,
    x: &[f64],
    t: f64,
    hess: &Mat,
    st: &Stencil,
) -> Result<Vec<f64>, SchemeError> {
    let dim = x.len();
    let mut q_star = vec![0.0; dim];
    for k in 0..dim {
        let (qm, qp) = (st.backward[k], st.forward[k]);
        let eval = |q: f64| -> f64 {
            let mut qv = vec![0.0; dim];
            qv[k] = q;
            match hamiltonian_eval(spec, x, t, &qv, hess) {
                Ok(ExtendedReal::Finite(v)) => v,
                _ => f64::INFINITY,
            }
        };
        q_star[k] = if qm > qp {
            if eval(qm) >= eval(qp) {
                qm
            } else {
                qp
            }
        } else {
            golden_min(qm, qp, 1e-12 * (qp - qm).abs().max(1.0), eval)
        };
    }
    Ok(q_star)
}

/// Advances from the initial slice to the horizon with the step recomputed
/// from the current iterate (the nonlinearity slope grows near blow-up);
/// declares blow-up once the max norm exceeds `10⁶·(1 + max|ψ|)`.
pub fn solve(
    spec: &ProblemSpec,
    init: GridFunction,
    boundary: &BoundaryCondition,
) -> Result<SolveOutcome, SchemeError> {
    let threshold = 1e6 * (1.0 + init.max_norm());
    let horizon = init.grid.horizon;
    let mut state = init;
    let mut history = vec![state.max_norm()];
    let mut steps = 0usize;

    while horizon - state.time > 1e-12 * horizon {
        let limit = match cfl_dt(spec, &state) {
            Ok(l) => l,
            Err(SchemeError::NonFiniteValue { at_time }) => {
                return Ok(SolveOutcome {
                    status: SolveStatus::BlewUp { tau_num: at_time },
                    final_state: state,
                    max_norm_history: history,
                    steps,
                })
            }
            Err(e) => return Err(e),
        };
        let dt = limit.min(horizon - state.time);
        if dt < 1e-13 * horizon {
            return Ok(SolveOutcome {
                status: SolveStatus::CflViolation {
                    at_time: state.time,
                },
                final_state: state,
                max_norm_history: history,
                steps,
            });
        }
        state = match step_unchecked(spec, &state, dt, boundary) {
            Ok(next) => next,
            Err(SchemeError::NonFiniteValue { at_time }) => {
                return Ok(SolveOutcome {
                    status: SolveStatus::BlewUp { tau_num: at_time },
                    final_state: state,
                    max_norm_history: history,
                    steps,
                })
            }
            Err(e) => return Err(e),
        };
        steps += 1;
        let norm = state.max_norm();
        history.push(norm);
        if !state.all_finite() || norm > threshold {
            return Ok(SolveOutcome {
                status: SolveStatus::BlewUp {
                    tau_num: state.time,
                },
                final_state: state,
                max_norm_history: history,
                steps,
            });
        }
    }

    Ok(SolveOutcome {
        status: SolveStatus::Completed,
        final_state: state,
        max_norm_history: history,
        steps,
    })
}

#[derive(Debug, Serialize)]
pub struct ComparisonReport {
    pub steps: usize,
    /// `max over steps and nodes of (u − v)₊`.
    pub max_violation: f64,
}

/// Evolves an ordered pair with one shared step sequence and reports the
/// worst ordering violation; monotonicity under the shared step keeps it at
/// rounding level.
pub fn discrete_comparison_trial(
    spec: &ProblemSpec,
    u0: GridFunction,
    v0: GridFunction,
    steps: usize,
) -> Result<ComparisonReport, SchemeError> {
    assert!(
        u0.values
            .iter()
            .zip(&v0.values)
            .all(|(a, b)| a <= b),
        "trial requires u0 <= v0 nodewise"
    );
    let mut u = u0;
    let mut v = v0;
    let mut violation = 0.0f64;
    for _ in 0..steps {
        // shared step below both monotonicity bounds
        let dt = 0.95 * cfl_dt(spec, &u)?.min(cfl_dt(spec, &v)?);
        u = step_unchecked(spec, &u, dt, &BoundaryCondition::Frozen)?;
        v = step_unchecked(spec, &v, dt, &BoundaryCondition::Frozen)?;
        for (a, b) in u.values.iter().zip(&v.values) {
            violation = violation.max(a - b);
        }
    }
    Ok(ComparisonReport {
        steps,
        max_violation: violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::problem::Coefficients;
    use crate::problem::{PresetParams, ProblemSpec};

    fn power_model_1d() -> ProblemSpec {
        ProblemSpec::from_preset("power_model", &PresetParams::default()).unwrap()
    }

    /// power_model with the gradient term switched off: the pure heat
    /// equation with unit diffusion.
    fn heat_1d() -> ProblemSpec {
        let mut spec = power_model_1d();
        spec.nonlinearity = Nonlinearity::PowerForm {
            weight: 0.0,
            exponent: 2.0,
            u_coeff: 0.0,
            source: None,
        };
        spec
    }

    #[test]
    fn heat_cfl_is_half_mesh_squared() {
        let spec = heat_1d();
        let grid = Grid::line(1.0, 21, 10.0).unwrap(); // h = 0.1
        let u = GridFunction::constant(grid, 0.0, 1.0);
        let dt = cfl_dt(&spec, &u).unwrap();
        assert!((dt - 0.005).abs() < 1e-15, "dt = {dt}");
    }

    #[test]
    fn cfl_caps_at_a_hundredth_of_the_horizon_without_constraints() {
        let spec = ProblemSpec::from_json(r#"{"preset": "lp_deterministic", "rho": 0.0}"#).unwrap();
        // zero initial state: no gradient, sigma = 0, b = 0
        let grid = Grid::line(1.0, 11, 5.0).unwrap();
        let u = GridFunction::constant(grid, 0.0, 0.0);
        let dt = cfl_dt(&spec, &u).unwrap();
        assert!((dt - 0.05).abs() < 1e-15, "dt = {dt}");
    }

    #[test]
    fn cfl_matches_hand_computed_bound_on_a_linear_iterate() {
        // power_model, p' = 2, s = I: slope = 2|Du|; on u = a·x every
        // one-sided difference equals a
        let spec = power_model_1d();
        let a = 1.5;
        let grid = Grid::line(2.0, 41, 1.0).unwrap(); // h = 0.1
        let u = GridFunction::from_fn(grid.clone(), 0.0, |x| a * x[0]);
        let dt = cfl_dt(&spec, &u).unwrap();
        let h = grid.mesh(0);
        let hand = 1.0 / (2.0 / (h * h) + 2.0 * a / h);
        let hand = hand.min(1.0 / 100.0);
        assert!((dt - hand).abs() < 1e-14, "{dt} vs {hand}");
    }

    #[test]
    fn constants_are_invariant_under_the_heat_update() {
        let spec = heat_1d();
        let grid = Grid::line(1.0, 11, 1.0).unwrap();
        let u = GridFunction::constant(grid, 0.0, 3.25);
        let dt = cfl_dt(&spec, &u).unwrap();
        let next = step_explicit(&spec, &u, dt, &BoundaryCondition::Frozen).unwrap();
        for v in &next.values {
            assert!((v - 3.25).abs() < 1e-14);
        }
    }

    #[test]
    fn upwind_transport_of_a_linear_profile_is_exact() {
        // sigma = 0, f = 0, b = const: one-sided differences of a linear
        // function are exact, so the update equals exact transport
        let mut spec = heat_1d();
        spec.coefficients = Coefficients::Model {
            drift: Box::new(|_x, _t| vec![0.7]),
            diffusion: Box::new(|_x, _t| Mat::zeros(1, 1)),
        };
        let a = -2.0;
        let grid = Grid::line(1.0, 11, 1.0).unwrap();
        let u = GridFunction::from_fn(grid, 0.0, |x| a * x[0]);
        let dt = 0.5 * cfl_dt(&spec, &u).unwrap();
        let next = step_explicit(&spec, &u, dt, &BoundaryCondition::Frozen).unwrap();
        for i in 1..10 {
            let x = next.grid.point(i)[0];
            let exact = a * x - dt * 0.7 * a;
            assert!((next.values[i] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn five_node_power_step_matches_scalar_recomputation() {
        let spec = power_model_1d();
        let grid = Grid::line(1.0, 5, 1.0).unwrap(); // h = 0.5
        let vals = [0.0, 0.5, 2.0, 0.4, 0.1];
        let u = GridFunction {
            grid: grid.clone(),
            values: vals.to_vec(),
            time: 0.0,
        };
        let dt = 0.8 * cfl_dt(&spec, &u).unwrap();
        let next = step_explicit(&spec, &u, dt, &BoundaryCondition::Frozen).unwrap();

        // independent scalar recomputation, node by node
        let h = 0.5;
        for i in 1..4 {
            let (um, uc, up) = (vals[i - 1], vals[i], vals[i + 1]);
            let second = (up - 2.0 * uc + um) / (h * h);
            let qm = (uc - um) / h;
            let qp = (up - uc) / h;
            let z = if qm > qp {
                if qm.abs() >= qp.abs() {
                    qm
                } else {
                    qp
                }
            } else if qm <= 0.0 && qp >= 0.0 {
                0.0
            } else if qm.abs() <= qp.abs() {
                qm
            } else {
                qp
            };
            let expected = uc + dt * (second - z * z);
            assert!(
                (next.values[i] - expected).abs() < 1e-14,
                "node {i}: {} vs {expected}",
                next.values[i]
            );
        }
        assert_eq!(next.values[0], vals[0]);
        assert_eq!(next.values[4], vals[4]);
    }

    #[test]
    fn cfl_violation_is_reported() {
        let spec = heat_1d();
        let grid = Grid::line(1.0, 11, 1.0).unwrap();
        let u = GridFunction::constant(grid, 0.0, 0.0);
        let dt = cfl_dt(&spec, &u).unwrap();
        assert!(matches!(
            step_explicit(&spec, &u, 2.0 * dt, &BoundaryCondition::Frozen),
            Err(SchemeError::CflViolation { .. })
        ));
    }

    #[test]
    fn zero_coefficients_leave_the_initial_state_fixed() {
        let spec = ProblemSpec::from_json(r#"{"preset": "lp_deterministic", "rho": 0.0}"#).unwrap();
        let grid = Grid::line(1.0, 21, 0.2).unwrap();
        // constant slice: no gradient, and the only f term vanishes at z = 0
        let init = GridFunction::constant(grid, 0.0, -0.5);
        let out = solve(&spec, init, &BoundaryCondition::Frozen).unwrap();
        assert_eq!(out.status, SolveStatus::Completed);
        for v in &out.final_state.values {
            assert!((v + 0.5).abs() < 1e-13);
        }
    }

    #[test]
    fn heat_sine_decays_at_the_separated_rate() {
        let spec = heat_1d();
        let m = 1.0;
        let grid = Grid::new(vec![m], vec![201], 0.1).unwrap();
        let k = std::f64::consts::PI / m;
        let init = GridFunction::from_fn(grid.clone(), 0.0, |x| (k * x[0]).sin());
        let out = solve(&spec, init, &BoundaryCondition::Frozen).unwrap();
        assert_eq!(out.status, SolveStatus::Completed);
        let decay = (-k * k * 0.1).exp();
        for i in 0..grid.node_count() {
            let x = grid.point(i)[0];
            let exact = decay * (k * x).sin();
            assert!(
                (out.final_state.values[i] - exact).abs() < 0.02 * decay,
                "x={x}: {} vs {exact}",
                out.final_state.values[i]
            );
        }
    }

    #[test]
    fn monotone_dependence_on_every_node_under_the_cfl_step() {
        use rand::{Rng, SeedableRng};
        let spec = power_model_1d();
        let grid = Grid::line(2.0, 41, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let base = GridFunction::from_fn(grid.clone(), 0.0, |x| (3.0 * x[0]).sin() * 1.5);
        let dt = 0.95 * cfl_dt(&spec, &base).unwrap();
        let reference = step_explicit(&spec, &base, dt, &BoundaryCondition::Frozen).unwrap();
        for _ in 0..100 {
            let node = rng.gen_range(0..grid.node_count());
            let delta = 1e-6;
            let mut bumped = base.clone();
            bumped.values[node] += delta;
            let stepped = step_explicit(&spec, &bumped, dt, &BoundaryCondition::Frozen).unwrap();
            for (a, b) in stepped.values.iter().zip(&reference.values) {
                assert!(a - b >= -1e-12, "non-monotone response at node {node}");
            }
        }
    }

    #[test]
    fn ordered_pairs_stay_ordered() {
        let spec = power_model_1d();
        let grid = Grid::line(2.0, 41, 1.0).unwrap();
        let v0 = GridFunction::from_fn(grid.clone(), 0.0, |x| (2.0 * x[0]).cos());
        let u0 = GridFunction {
            grid: grid.clone(),
            values: v0.values.iter().map(|v| v - 1.0).collect(),
            time: 0.0,
        };
        let report = discrete_comparison_trial(&spec, u0, v0, 50).unwrap();
        assert!(report.max_violation <= 1e-10, "{}", report.max_violation);
    }

    #[test]
    fn equal_states_never_separate() {
        let spec = power_model_1d();
        let grid = Grid::line(1.0, 21, 1.0).unwrap();
        let u0 = GridFunction::from_fn(grid.clone(), 0.0, |x| x[0].sin());
        let report = discrete_comparison_trial(&spec, u0.clone(), u0, 30).unwrap();
        assert_eq!(report.max_violation, 0.0);
    }

    #[test]
    fn interior_gap_of_the_heat_pair_is_preserved_exactly() {
        let spec = heat_1d();
        let grid = Grid::line(1.0, 21, 1.0).unwrap();
        let v0 = GridFunction::from_fn(grid.clone(), 0.0, |x| (2.0 * x[0]).cos());
        let mut u = GridFunction {
            grid: grid.clone(),
            values: v0.values.iter().map(|v| v - 1.0).collect(),
            time: 0.0,
        };
        let mut v = v0;
        // one step: the linear update preserves the constant gap away from
        // the boundary stencils
        let dt = 0.9 * cfl_dt(&spec, &u).unwrap();
        u = step_explicit(&spec, &u, dt, &BoundaryCondition::Frozen).unwrap();
        v = step_explicit(&spec, &v, dt, &BoundaryCondition::Frozen).unwrap();
        for i in 2..19 {
            assert!((v.values[i] - u.values[i] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn one_step_residual_shrinks_with_the_mesh() {
        // truncation of one explicit step on a smooth candidate, measured
        // as (S u_exact(t) − u_exact(t+dt))/dt; upwinding makes it O(h)
        use crate::oracles::manufactured::{
            ManufacturedKind, ManufacturedParams, ManufacturedSolution,
        };
        let drift = 0.8;
        let sol = ManufacturedSolution::new(
            ManufacturedKind::SeparatedSine,
            ManufacturedParams {
                amplitude: 1.0,
                wave: vec![2.0],
                p: 2.0,
            },
        );
        let forcing_sol = sol.clone();
        let forcing = move |x: &[f64], t: f64| -> f64 {
            let du = forcing_sol.gradient(x, t);
            let d2 = forcing_sol.hessian(x, t);
            forcing_sol.dt(x, t) - d2.get(0, 0) + drift * du[0] + du[0] * du[0]
        };
        let mut spec = power_model_1d();
        spec.coefficients = Coefficients::Model {
            drift: Box::new(move |_x, _t| vec![drift]),
            diffusion: Box::new(|_x, _t| Mat::identity(1)),
        };
        spec.nonlinearity = Nonlinearity::PowerForm {
            weight: 1.0,
            exponent: 2.0,
            u_coeff: 0.0,
            source: Some(Box::new(move |x, t| -forcing(x, t))),
        };

        let mut residuals = Vec::new();
        for nodes in [41usize, 81, 161] {
            let grid = Grid::new(vec![1.0], vec![nodes], 1.0).unwrap();
            let h = grid.mesh(0);
            let dt = 0.1 * h * h;
            let t0 = 0.3;
            let s = sol.clone();
            let state = GridFunction::from_fn(grid.clone(), t0, |x| s.value(x, t0));
            let stepped = step_explicit(&spec, &state, dt, &BoundaryCondition::Frozen).unwrap();
            let mut worst = 0.0f64;
            for i in 2..grid.node_count() - 2 {
                let x = grid.point(i);
                let res = (stepped.values[i] - sol.value(&x, t0 + dt)) / dt;
                worst = worst.max(res.abs());
            }
            residuals.push(worst);
        }
        let r1 = residuals[0] / residuals[1];
        let r2 = residuals[1] / residuals[2];
        assert!(
            r1 >= 1.7 && r2 >= 1.7,
            "residuals {residuals:?}, ratios {r1:.2} / {r2:.2}"
        );
    }

    #[test]
    fn two_dimensional_heat_constant_invariance() {
        let mut spec = ProblemSpec::from_json(r#"{"preset": "power_model", "space_dim": 2}"#)
            .unwrap();
        spec.nonlinearity = Nonlinearity::PowerForm {
            weight: 0.0,
            exponent: 2.0,
            u_coeff: 0.0,
            source: None,
        };
        let grid = Grid::new(vec![1.0, 1.0], vec![11, 11], 1.0).unwrap();
        let u = GridFunction::constant(grid, 0.0, -2.0);
        let dt = cfl_dt(&spec, &u).unwrap();
        let next = step_explicit(&spec, &u, dt, &BoundaryCondition::Frozen).unwrap();
        for v in &next.values {
            assert!((v + 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn cross_diffusion_in_two_dimensions_is_rejected() {
        let mut spec = ProblemSpec::from_json(r#"{"preset": "power_model", "space_dim": 2}"#)
            .unwrap();
        spec.coefficients = Coefficients::Model {
            drift: Box::new(|_x, _t| vec![0.0, 0.0]),
            diffusion: Box::new(|_x, _t| Mat::new(2, 2, vec![1.0, 0.4, 0.0, 1.0])),
        };
        let grid = Grid::new(vec![1.0, 1.0], vec![5, 5], 1.0).unwrap();
        let u = GridFunction::constant(grid, 0.0, 0.0);
        assert!(matches!(
            cfl_dt(&spec, &u),
            Err(SchemeError::UnsupportedCoupling(_))
        ));
    }

    #[test]
    fn controlled_lq_short_solve_stays_finite() {
        let spec = ProblemSpec::from_json(r#"{"preset": "eq3_lq", "horizon": 0.05}"#).unwrap();
        let grid = Grid::new(vec![1.0], vec![21], 0.05).unwrap();
        let init = GridFunction::from_fn(grid, 0.0, |x| 0.5 * (1.0 + x[0] * x[0]).sqrt());
        let out = solve(&spec, init, &BoundaryCondition::Frozen).unwrap();
        assert_eq!(out.status, SolveStatus::Completed);
        assert!(out.final_state.all_finite());
    }
}
