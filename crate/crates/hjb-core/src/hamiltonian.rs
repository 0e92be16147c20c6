//! Extended-real evaluation of sup-type Hamiltonians over unbounded control
//! sets, and the power Legendre transform used by registered families.

use crate::extended::ExtendedReal;
use crate::problem::{Coefficients, ControlFamily, ProblemSpec};
use crate::util::{dot, golden_min, norm, Mat};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HamiltonianError {
    #[error("non-coercive problem: {0}")]
    NonCoercive(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// `sup_α { ⟨α,q⟩ − ν|α|^m }` in closed form.
///
/// The optimum is radial along `q` with `|α*| = (|q|/(νm))^{1/(m−1)}`; this
/// is the building block turning power-of-gradient nonlinearities into
/// control suprema and back.
pub fn legendre_power(nu: f64, m: f64, q: &[f64]) -> f64 {
    assert!(nu > 0.0, "legendre_power requires nu > 0");
    assert!(m > 1.0, "legendre_power requires m > 1");
    let qn = norm(q);
    if qn == 0.0 {
        return 0.0;
    }
    let r = (qn / (nu * m)).powf(1.0 / (m - 1.0));
    qn * r - nu * r.powf(m)
}

/// Coercivity radius: beyond it `ν|α|^p` dominates every other control term
/// of the objective, so the supremum over the whole space equals the
/// supremum over the ball of this radius.
pub fn control_radius(spec: &ProblemSpec, q: &[f64], hess: &Mat) -> Result<f64, HamiltonianError> {
    let c = &spec.constants;
    if !(c.nu > 0.0) {
        return Err(HamiltonianError::NonCoercive(format!(
            "nu = {} must be positive",
            c.nu
        )));
    }
    let bound = ((norm(q) * c.c_b + hess.frobenius_norm() * c.c_sigma * c.c_sigma + c.c_ell)
        * 2.0
        / c.nu)
        .powf(1.0 / (spec.p - 1.0));
    if !bound.is_finite() {
        return Err(HamiltonianError::NonCoercive(
            "control radius overflowed".into(),
        ));
    }
    Ok(bound.max(1.0))
}

/// Evaluates `H(x,t,q,X) = sup_α {−⟨b,q⟩ − ℓ − Tr(σσᵀX)}`.
///
/// Registered families use their closed form. Otherwise the supremum is
/// taken over the coercivity ball on a 64-points-per-axis grid with one
/// golden-section refinement, after probing eight fixed directions at radii
/// `2·A_max` and `10·A_max` for super-linear growth, which certifies a
/// `+∞` value.
pub fn hamiltonian_eval(
    spec: &ProblemSpec,
    x: &[f64],
    t: f64,
    q: &[f64],
    hess: &Mat,
) -> Result<ExtendedReal, HamiltonianError> {
    let n = spec.space_dim;
    if x.len() != n || q.len() != n {
        return Err(HamiltonianError::DimensionMismatch {
            expected: n,
            got: if x.len() != n { x.len() } else { q.len() },
        });
    }
    if hess.rows != n || hess.cols != n {
        return Err(HamiltonianError::DimensionMismatch {
            expected: n,
            got: hess.rows,
        });
    }

    let (drift, diffusion, running_cost, control_dim, family) = match &spec.coefficients {
        Coefficients::Controlled {
            drift,
            diffusion,
            running_cost,
            control_dim,
            family,
        } => (drift, diffusion, running_cost, *control_dim, *family),
        Coefficients::Model { .. } => {
            return Err(HamiltonianError::NonCoercive(
                "hamiltonian_eval needs a controlled problem".into(),
            ))
        }
    };

    if let ControlFamily::LqIsotropic { nu, trace_weight } = family {
        // sup_α {−⟨α,q⟩ − c|α|²}, c = ν + w·Tr X.
        let tr: f64 = (0..n).map(|i| hess.get(i, i)).sum();
        let c = nu + trace_weight * tr;
        let qn = norm(q);
        return Ok(if c > 0.0 {
            ExtendedReal::Finite(qn * qn / (4.0 * c))
        } else if c == 0.0 && qn == 0.0 {
            ExtendedReal::Finite(0.0)
        } else {
            ExtendedReal::PosInfinity
        });
    }

    let objective = |alpha: &[f64]| -> f64 {
        let b = drift(x, t, alpha);
        let gram = diffusion(x, t, alpha).gram();
        -dot(&b, q) - running_cost(x, t, alpha) - gram.trace_product(hess)
    };

    let a_max = control_radius(spec, q, hess)?;

    // Divergence probe: super-linear growth along any ray certifies +∞.
    let dirs = probe_directions(control_dim);
    for dir in &dirs {
        let near: Vec<f64> = dir.iter().map(|d| d * 2.0 * a_max).collect();
        let far: Vec<f64> = dir.iter().map(|d| d * 10.0 * a_max).collect();
        let v_near = objective(&near);
        let v_far = objective(&far);
        let scale = v_near.abs().max(v_far.abs()).max(1.0);
        if v_far - v_near > 1e-6 * scale {
            return Ok(ExtendedReal::PosInfinity);
        }
    }

    Ok(ExtendedReal::Finite(grid_search_sup(
        &objective,
        control_dim,
        a_max,
    )))
}

fn probe_directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => {
            let inv = std::f64::consts::FRAC_1_SQRT_2;
            vec![
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
                vec![inv, inv],
                vec![inv, -inv],
                vec![-inv, inv],
                vec![-inv, -inv],
            ]
        }
        d => {
            // axis-aligned rays in higher control dimensions
            let mut dirs = Vec::with_capacity(2 * d);
            for k in 0..d {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                dirs.push(e.clone());
                e[k] = -1.0;
                dirs.push(e);
            }
            dirs
        }
    }
}

/// 64 points per axis over `[−a_max, a_max]^dim`, then one golden-section
/// refinement around the best cell along each axis.
fn grid_search_sup(objective: &impl Fn(&[f64]) -> f64, dim: usize, a_max: f64) -> f64 {
    const POINTS: usize = 64;
    let coords: Vec<f64> = (0..POINTS)
        .map(|i| -a_max + 2.0 * a_max * i as f64 / (POINTS - 1) as f64)
        .collect();

    let mut best = f64::NEG_INFINITY;
    let mut best_alpha = vec![0.0; dim];
    let mut idx = vec![0usize; dim];
    loop {
        let alpha: Vec<f64> = idx.iter().map(|&i| coords[i]).collect();
        let v = objective(&alpha);
        if v > best {
            best = v;
            best_alpha = alpha;
        }
        // odometer over the grid
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < POINTS {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == dim {
                // refinement: one golden-section pass per axis around the max
                let cell = 2.0 * a_max / (POINTS - 1) as f64;
                let mut refined = best_alpha.clone();
                for axis in 0..dim {
                    let lo = (refined[axis] - cell).max(-a_max);
                    let hi = (refined[axis] + cell).min(a_max);
                    let mut probe = refined.clone();
                    let arg = golden_min(lo, hi, 1e-10 * a_max.max(1.0), |v| {
                        probe[axis] = v;
                        -objective(&probe)
                    });
                    refined[axis] = arg;
                }
                let v = objective(&refined);
                return v.max(best);
            }
        }
    }
}
