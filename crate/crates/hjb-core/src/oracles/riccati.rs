//! The separated blow-up ODE of the deterministic power-cost control value:
//! `−φ' + |φ|^{p'}/p' = ρ` on `(0,T)` with `φ(T) = −1`.
//!
//! Backward integration from the terminal condition either settles (for
//! `ρp' ≥ 1` the trajectory is attracted to the positive equilibrium) or
//! escapes to `−∞` at a time `τ ∈ (0,T)` characterized by the integral
//! identity `∫_{−1}^{φ(t)} p'/(|y|^{p'} − ρp') dy = t − T`; the improper
//! integral down to `−∞` is the largest horizon without blow-up.

use serde::Serialize;
use thiserror::Error;

/// Escape level treated as numerical blow-up.
const BLOW_UP_LEVEL: f64 = 1e8;

#[derive(Debug, Error)]
pub enum RiccatiError {
    #[error("quadrature diverges: rho*p' = {0} >= 1, no finite blow-up threshold")]
    QuadratureDivergence(f64),
    #[error("time {t} is at or beyond the blow-up time {tau}")]
    BeyondBlowUp { t: f64, tau: f64 },
    #[error("time {0} outside the solved interval")]
    OutsideTrajectory(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Parameters of the separated problem. The terminal value is `−1`.
#[derive(Clone, Copy, Debug)]
pub struct RiccatiProblem {
    pub p: f64,
    pub p_conj: f64,
    pub rho: f64,
    pub horizon: f64,
}

impl RiccatiProblem {
    pub fn new(p: f64, rho: f64, horizon: f64) -> Result<Self, RiccatiError> {
        if !(p > 1.0) {
            return Err(RiccatiError::InvalidParameter(format!("p = {p} must be > 1")));
        }
        if rho < 0.0 {
            return Err(RiccatiError::InvalidParameter(format!(
                "rho = {rho} must be >= 0"
            )));
        }
        if !(horizon > 0.0) {
            return Err(RiccatiError::InvalidParameter(format!(
                "horizon = {horizon} must be > 0"
            )));
        }
        let p_conj = p / (p - 1.0);
        debug_assert!((p_conj * (p - 1.0) - p).abs() <= 1e-12 * p);
        Ok(RiccatiProblem {
            p,
            p_conj,
            rho,
            horizon,
        })
    }

    /// Right-hand side in the reversed clock `s = T − t`:
    /// `dφ/ds = ρ − |φ|^{p'}/p'`.
    fn reversed_rhs(&self, phi: f64) -> f64 {
        self.rho - phi.abs().powf(self.p_conj) / self.p_conj
    }

    /// Second reversed-clock derivative, `F'(φ)·F(φ)`.
    fn reversed_rhs2(&self, phi: f64) -> f64 {
        -phi.abs().powf(self.p_conj - 1.0) * phi.signum() * self.reversed_rhs(phi)
    }
}

/// Trajectory, detected blow-up time and quadrature cross-check.
#[derive(Debug, Serialize)]
pub struct BlowUpReport {
    pub p: f64,
    pub p_conj: f64,
    pub rho: f64,
    pub horizon: f64,
    /// `(t, φ(t))` samples in ascending `t` order.
    pub trajectory: Vec<(f64, f64)>,
    /// Blow-up time in the original clock, if detected within the horizon.
    pub tau: Option<f64>,
    /// Width of the time bracket enclosing the detection.
    pub tau_bracket_width: f64,
    /// `∫_{−∞}^{−1} p'/(|y|^{p'} − ρp') dy`, the horizon threshold
    /// (`None` when `ρp' ≥ 1` and the integral diverges).
    pub quadrature_threshold: Option<f64>,
    /// Blow-up time from inverting the integral identity.
    pub tau_from_quadrature: Option<f64>,
    #[serde(skip)]
    knots: Vec<Knot>,
}

#[derive(Clone, Copy, Debug)]
struct Knot {
    s: f64,
    phi: f64,
    dphi: f64,
    d2phi: f64,
}

/// Integrates the problem backward from `t = T` with classical one-step
/// fourth-order stages, shrinking the step as `|φ|` grows; declares blow-up
/// past `|φ| > 1e8` and cross-checks the detected time against the
/// quadrature inversion of the integral identity.
pub fn riccati_solve(prob: &RiccatiProblem, dt: f64) -> Result<BlowUpReport, RiccatiError> {
    assert!(dt > 0.0, "riccati_solve requires dt > 0");
    let t_total = prob.horizon;
    let mut s = 0.0;
    let mut phi = -1.0f64;
    let mut knots = vec![Knot {
        s,
        phi,
        dphi: prob.reversed_rhs(phi),
        d2phi: prob.reversed_rhs2(phi),
    }];
    let mut blow_s: Option<(f64, f64)> = None; // (s at detection, last step)

    while s < t_total {
        // local growth time-scale keeps the step resolved near the escape
        let scale = prob.p_conj / phi.abs().max(1.0).powf(prob.p_conj - 1.0);
        let mut h = dt.min(0.05 * scale).min(t_total - s);
        let mut next;
        loop {
            next = rk4_step(prob, phi, h);
            // halve the step whenever the value doubles within one step
            if next.abs() > 2.0 * phi.abs().max(1.0) && h > 1e-15 {
                h *= 0.5;
            } else {
                break;
            }
        }
        s += h;
        phi = next;
        knots.push(Knot {
            s,
            phi,
            dphi: prob.reversed_rhs(phi),
            d2phi: prob.reversed_rhs2(phi),
        });
        // escape detection: either the level threshold, or (for steep
        // conjugate exponents whose step collapses first) a remaining time
        // to the singularity, bounded by the tail integral
        // ∫_{|φ|}^∞ p' dy / y^{p'} = p'/((p'−1)|φ|^{p'−1}), below 1e-9
        if phi < -10.0 {
            let tail = prob.p_conj
                / ((prob.p_conj - 1.0) * phi.abs().powf(prob.p_conj - 1.0));
            if phi.abs() > BLOW_UP_LEVEL || tail < 1e-9 {
                blow_s = Some((s, h));
                break;
            }
        }
        if h < 1e-15 {
            break;
        }
    }

    let product = prob.rho * prob.p_conj;
    let quadrature_threshold = if product < 1.0 {
        Some(blow_up_horizon_threshold(prob.p_conj, prob.rho)?)
    } else {
        None
    };

    let (tau, bracket) = match blow_s {
        Some((s_b, h)) => {
            // singularity completion: the remaining time from the detected
            // level to the escape is the ODE's own tail integral
            let tail = tail_time(prob.p_conj, prob.rho, phi);
            (Some(t_total - s_b - tail), h)
        }
        None => (None, 0.0),
    };
    let tau_from_quadrature = match (tau, quadrature_threshold) {
        (Some(_), Some(threshold)) => Some(t_total - threshold),
        _ => None,
    };

    let trajectory: Vec<(f64, f64)> = knots
        .iter()
        .rev()
        .map(|k| (t_total - k.s, k.phi))
        .collect();

    Ok(BlowUpReport {
        p: prob.p,
        p_conj: prob.p_conj,
        rho: prob.rho,
        horizon: prob.horizon,
        trajectory,
        tau,
        tau_bracket_width: bracket,
        quadrature_threshold,
        tau_from_quadrature,
        knots,
    })
}

fn rk4_step(prob: &RiccatiProblem, phi: f64, h: f64) -> f64 {
    let k1 = prob.reversed_rhs(phi);
    let k2 = prob.reversed_rhs(phi + 0.5 * h * k1);
    let k3 = prob.reversed_rhs(phi + 0.5 * h * k2);
    let k4 = prob.reversed_rhs(phi + h * k3);
    phi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// `∫_{−∞}^{−1} p'/(|y|^{p'} − ρp') dy`, evaluated after mapping the tail to
/// `[0,1]`; the substitutions `y = −1/w`, `w = v^{p−1}` produce the smooth
/// integrand `p / (1 − ρp' v^p)`.
pub fn blow_up_horizon_threshold(p_conj: f64, rho: f64) -> Result<f64, RiccatiError> {
    let product = rho * p_conj;
    if product >= 1.0 {
        return Err(RiccatiError::QuadratureDivergence(product));
    }
    let p = p_conj / (p_conj - 1.0);
    Ok(simpson_adaptive(
        |v| p / (1.0 - product * v.powf(p)),
        0.0,
        1.0,
        1e-12,
    ))
}

/// `∫_{−∞}^{φ} p'/(|y|^{p'} − ρp') dy` for `φ ≤ −1`: the time left until
/// the escape once the trajectory has reached `φ`.
fn tail_time(p_conj: f64, rho: f64, phi: f64) -> f64 {
    let product = rho * p_conj;
    debug_assert!(product < 1.0 && phi <= -1.0);
    let p = p_conj / (p_conj - 1.0);
    let v_phi = (-1.0 / phi).powf(p_conj - 1.0);
    simpson_adaptive(|v| p / (1.0 - product * v.powf(p)), 0.0, v_phi, 1e-12)
}

/// `∫_{−1}^{φ} p'/(|y|^{p'} − ρp') dy` for `φ ≤ −1`; equals `t − T` along
/// the solution.
pub fn integral_identity_lhs(p_conj: f64, rho: f64, phi: f64) -> Result<f64, RiccatiError> {
    let product = rho * p_conj;
    if product >= 1.0 {
        return Err(RiccatiError::QuadratureDivergence(product));
    }
    assert!(phi <= -1.0);
    let p = p_conj / (p_conj - 1.0);
    let v_phi = (-1.0 / phi).powf(p_conj - 1.0);
    Ok(-simpson_adaptive(
        |v| p / (1.0 - product * v.powf(p)),
        v_phi,
        1.0,
        1e-12,
    ))
}

fn simpson_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let mut n = 64usize;
    let mut prev = simpson_fixed(&f, a, b, n);
    loop {
        n *= 2;
        let cur = simpson_fixed(&f, a, b, n);
        if (cur - prev).abs() <= tol * (1.0 + cur.abs()) || n >= 1 << 22 {
            return cur;
        }
        prev = cur;
    }
}

fn simpson_fixed(f: &impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 0 { 2.0 } else { 4.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

impl BlowUpReport {
    /// Interpolated `φ(t)` from the stored dense output.
    pub fn phi(&self, t: f64) -> Result<f64, RiccatiError> {
        self.hermite(t).map(|(v, _)| v)
    }

    /// Residual of the separated value-function form at `(x, t)`: `|x|^p`
    /// times the interpolant defect `|φ̇ − (|φ|^{p'}/p' − ρ)|`, which decays
    /// at the one-step method's order as the integration step shrinks.
    pub fn lp_value_residual(&self, x: f64, t: f64) -> Result<f64, RiccatiError> {
        if let Some(tau) = self.tau {
            if t <= tau {
                return Err(RiccatiError::BeyondBlowUp { t, tau });
            }
        }
        let (phi, dphi_ds) = self.hermite(t)?;
        // original-clock derivative flips the reversed-clock sign
        let dphi_dt = -dphi_ds;
        let defect = -dphi_dt + phi.abs().powf(self.p_conj) / self.p_conj - self.rho;
        Ok(x.abs().powf(self.p) * defect.abs())
    }

    /// Quintic Hermite value and reversed-clock derivative at `t`, built
    /// from `(φ, φ', φ'')` at the bracketing knots.
    fn hermite(&self, t: f64) -> Result<(f64, f64), RiccatiError> {
        let s = self.horizon - t;
        let last = self.knots.last().expect("nonempty trajectory").s;
        if s < 0.0 || s > last {
            return Err(RiccatiError::OutsideTrajectory(t));
        }
        let idx = match self
            .knots
            .binary_search_by(|k| k.s.partial_cmp(&s).unwrap())
        {
            Ok(i) => return Ok((self.knots[i].phi, self.knots[i].dphi)),
            Err(i) => i - 1,
        };
        let k0 = self.knots[idx];
        let k1 = self.knots[idx + 1];
        let h = k1.s - k0.s;
        let w = (s - k0.s) / h;
        let (w2, w3) = (w * w, w * w * w);
        let (w4, w5) = (w3 * w, w3 * w2);
        let value = k0.phi * (1.0 - 10.0 * w3 + 15.0 * w4 - 6.0 * w5)
            + k0.dphi * h * (w - 6.0 * w3 + 8.0 * w4 - 3.0 * w5)
            + k0.d2phi * h * h * (0.5 * w2 - 1.5 * w3 + 1.5 * w4 - 0.5 * w5)
            + k1.phi * (10.0 * w3 - 15.0 * w4 + 6.0 * w5)
            + k1.dphi * h * (-4.0 * w3 + 7.0 * w4 - 3.0 * w5)
            + k1.d2phi * h * h * (0.5 * w3 - w4 + 0.5 * w5);
        let deriv = (k0.phi * (-30.0 * w2 + 60.0 * w3 - 30.0 * w4)
            + k0.dphi * h * (1.0 - 18.0 * w2 + 32.0 * w3 - 15.0 * w4)
            + k0.d2phi * h * h * (w - 4.5 * w2 + 6.0 * w3 - 2.5 * w4)
            + k1.phi * (30.0 * w2 - 60.0 * w3 + 30.0 * w4)
            + k1.dphi * h * (-12.0 * w2 + 28.0 * w3 - 15.0 * w4)
            + k1.d2phi * h * h * (1.5 * w2 - 4.0 * w3 + 2.5 * w4))
            / h;
        Ok((value, deriv))
    }

    /// Serializes the trajectory as `t,phi` CSV.
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("t,phi\n");
        for (t, phi) in &self.trajectory {
            out.push_str(&format!("{t},{phi}\n"));
        }
        out
    }
}
