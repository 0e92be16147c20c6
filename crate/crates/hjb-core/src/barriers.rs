//! Explicit sub/supersolution barriers with two closed-form space
//! derivatives, and residual certification of the defining inequalities.
//!
//! Three families are built here:
//!
//! * power barriers `±K e^{ρt}(1+|x|²)^{p/2}` with `K` above the sampled
//!   envelope constant of the initial datum and `ρ` above the operator's
//!   growth budget;
//! * the exponential-envelope subsolution
//!   `u_ε = −e^{ρt}(M_ε + ε(1+|x|²)^{p/2})`, valid while
//!   `(p'−1)ρt ≤ 1`;
//! * the composite strict supersolution `Φ(x,t) = φ_R(h(x), Ct)` driven by
//!   the auxiliary radial problem, certified through the linearized
//!   comparison operator.

use crate::extended::ExtendedReal;
use crate::grid::GridFunction;
use crate::hamiltonian::{control_radius, hamiltonian_eval, HamiltonianError};
use crate::oracles::auxiliary::{AuxiliaryError, AuxiliarySolution};
use crate::problem::{Coefficients, ControlFamily, Nonlinearity, ProblemSpec};
use crate::scheme::BoundaryCondition;
use crate::transforms::ChangeOfFunctions;
use crate::util::{dot, outer, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BarrierError {
    #[error("missing or non-finite structural constants: {0}")]
    MissingConstants(String),
    #[error("strict-growth envelopes (chi, gamma) are required for the envelope subsolution")]
    MissingEnvelopes,
    #[error(
        "eps = {eps} too large for control-unbounded diffusion at p = 2; \
         the trace term is dominated only for eps <= {max_eps}"
    )]
    InfeasibleEps { eps: f64, max_eps: f64 },
    #[error("coercivity cannot dominate the control-quadratic trace term: {0}")]
    InfeasibleCoercivity(String),
    #[error("no control witness found at x = {point:?}, t = {time}: best value {best_value}")]
    NoWitnessFound {
        point: Vec<f64>,
        time: f64,
        best_value: f64,
        best_control: Vec<f64>,
    },
    #[error("derivatives unavailable: {0}")]
    DerivativeUnavailable(String),
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error(transparent)]
    Auxiliary(#[from] AuxiliaryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BarrierSign {
    Sub,
    Super,
}

#[derive(Clone)]
pub enum BarrierForm {
    /// `sign · K e^{ρt} (1+|x|²)^{p/2}`.
    Power { k: f64, rho: f64 },
    /// `−e^{ρt} (M_ε + ε (1+|x|²)^{p/2})`.
    EpsFamily { eps: f64, m_eps: f64, rho: f64 },
    /// `Φ(x,t) = φ_R(h(x), C·t)` with `h` from the change of functions.
    PhiComposite {
        aux: AuxiliarySolution,
        big_c: f64,
        cf: ChangeOfFunctions,
    },
}

/// A closed-form barrier, evaluable with two space derivatives and one time
/// derivative.
#[derive(Clone)]
pub struct BarrierFamily {
    pub form: BarrierForm,
    pub sign: BarrierSign,
    pub p: f64,
    /// The certified validity window `[0, τ]`.
    pub tau_valid: f64,
    pub warning: Option<String>,
}

fn envelope(p: f64, x: &[f64]) -> f64 {
    (1.0 + dot(x, x)).powf(p / 2.0)
}

fn envelope_gradient(p: f64, x: &[f64]) -> Vec<f64> {
    let c = p * (1.0 + dot(x, x)).powf(p / 2.0 - 1.0);
    x.iter().map(|v| c * v).collect()
}

fn envelope_hessian(p: f64, x: &[f64]) -> Mat {
    let n = x.len();
    let q = 1.0 + dot(x, x);
    let a = p * q.powf(p / 2.0 - 1.0);
    let b = p * (p - 2.0) * q.powf(p / 2.0 - 2.0);
    let mut m = outer(x);
    for v in m.data.iter_mut() {
        *v *= b;
    }
    for i in 0..n {
        m.set(i, i, m.get(i, i) + a);
    }
    m
}

impl BarrierFamily {
    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        match &self.form {
            BarrierForm::Power { k, rho } => {
                let s = if self.sign == BarrierSign::Super { 1.0 } else { -1.0 };
                s * k * (rho * t).exp() * envelope(self.p, x)
            }
            BarrierForm::EpsFamily { eps, m_eps, rho } => {
                -(rho * t).exp() * (m_eps + eps * envelope(self.p, x))
            }
            BarrierForm::PhiComposite { aux, big_c, cf } => aux
                .jet(cf.h(x), big_c * t)
                .map(|j| j.value)
                .unwrap_or(f64::NAN),
        }
    }

    pub fn gradient(&self, x: &[f64], t: f64) -> Vec<f64> {
        match &self.form {
            BarrierForm::Power { k, rho } => {
                let s = if self.sign == BarrierSign::Super { 1.0 } else { -1.0 };
                let c = s * k * (rho * t).exp();
                envelope_gradient(self.p, x).into_iter().map(|g| c * g).collect()
            }
            BarrierForm::EpsFamily { eps, rho, .. } => {
                let c = -(rho * t).exp() * eps;
                envelope_gradient(self.p, x).into_iter().map(|g| c * g).collect()
            }
            BarrierForm::PhiComposite { aux, big_c, cf } => {
                let jet = aux.jet(cf.h(x), big_c * t).expect("positive level");
                cf.grad_h(x).into_iter().map(|g| jet.d_r * g).collect()
            }
        }
    }

    pub fn hessian(&self, x: &[f64], t: f64) -> Mat {
        match &self.form {
            BarrierForm::Power { k, rho } => {
                let s = if self.sign == BarrierSign::Super { 1.0 } else { -1.0 };
                let c = s * k * (rho * t).exp();
                let mut m = envelope_hessian(self.p, x);
                for v in m.data.iter_mut() {
                    *v *= c;
                }
                m
            }
            BarrierForm::EpsFamily { eps, rho, .. } => {
                let c = -(rho * t).exp() * eps;
                let mut m = envelope_hessian(self.p, x);
                for v in m.data.iter_mut() {
                    *v *= c;
                }
                m
            }
            BarrierForm::PhiComposite { aux, big_c, cf } => {
                let jet = aux.jet(cf.h(x), big_c * t).expect("positive level");
                let dh = cf.grad_h(x);
                let mut m = cf.hess_h(x);
                for v in m.data.iter_mut() {
                    *v *= jet.d_r;
                }
                let rank_one = outer(&dh);
                for (target, source) in m.data.iter_mut().zip(&rank_one.data) {
                    *target += jet.d_rr * source;
                }
                m
            }
        }
    }

    pub fn time_derivative(&self, x: &[f64], t: f64) -> f64 {
        match &self.form {
            BarrierForm::Power { rho, .. } | BarrierForm::EpsFamily { rho, .. } => {
                rho * self.value(x, t)
            }
            BarrierForm::PhiComposite { aux, big_c, cf } => {
                let jet = aux.jet(cf.h(x), big_c * t).expect("positive level");
                big_c * jet.d_t
            }
        }
    }

    /// Dirichlet boundary data carrying this barrier's values.
    pub fn boundary_condition(&self) -> BoundaryCondition {
        let clone = self.clone();
        BoundaryCondition::Dirichlet(Box::new(move |x, t| clone.value(x, t)))
    }
}

/// Sampled envelope constant `max |g| / (1+|x|²)^{p/2}` over a line or
/// lattice of radius 32.
fn sampled_envelope_constant(spec: &ProblemSpec, g: impl Fn(&[f64]) -> f64) -> f64 {
    let radius = 32.0;
    let mut worst = 0.0f64;
    match spec.space_dim {
        1 => {
            for i in 0..=4096 {
                let x = [-radius + 2.0 * radius * i as f64 / 4096.0];
                worst = worst.max(g(&x).abs() / envelope(spec.p, &x));
            }
        }
        _ => {
            for i in 0..=128 {
                for j in 0..=128 {
                    let x = [
                        -radius + 2.0 * radius * i as f64 / 128.0,
                        -radius + 2.0 * radius * j as f64 / 128.0,
                    ];
                    worst = worst.max(g(&x).abs() / envelope(spec.p, &x));
                }
            }
        }
    }
    worst
}

/// Shared operator growth budget per unit of barrier mass: drift, trace and
/// nonlinearity contributions measured against the smooth envelope.
fn growth_budget(spec: &ProblemSpec, k_mass: f64, eps_power_factor: f64) -> f64 {
    let c = &spec.constants;
    let n = spec.space_dim as f64;
    let m_p = 1.0f64.max(spec.p - 1.0);
    let drift = 2f64.sqrt() * spec.p * c.c_b;
    let trace = 2.0 * n * spec.p * m_p * c.c_sigma * c.c_sigma;
    let u_coeff = match &spec.nonlinearity {
        Nonlinearity::PowerForm { u_coeff, .. } => u_coeff.abs(),
        Nonlinearity::Custom(_) => c.c_hat,
    };
    // |f| <= C_f(1 + |x|^p + |u| + |z|^{p'}) folded barrier-relative:
    // the constant through 1/k_mass, the x-growth through 2/k_mass, the
    // u-part directly, and the gradient power through the mass factor
    let f_term = c.c_f
        * (3.0 / k_mass
            + 1.0
            + c.c_s.powf(spec.p_conj) * spec.p.powf(spec.p_conj) * eps_power_factor);
    drift + trace + u_coeff + f_term
}

/// Builds the power barrier pair of one problem. The supersolution is valid
/// on `[0, T]` for power-form nonlinearities (whose gradient part is
/// nonnegative); the subsolution on `[0, τ]` with `(p'−1)ρτ ≤ 1`.
pub fn build_power_barriers(
    spec: &ProblemSpec,
) -> Result<(BarrierFamily, BarrierFamily), BarrierError> {
    if !spec.constants.all_finite() {
        return Err(BarrierError::MissingConstants(
            "assumption constants must be finite".into(),
        ));
    }
    let k = sampled_envelope_constant(spec, |x| (spec.initial)(x)) + 1.0;
    // e^{(p'-1)ρt} <= e on the subsolution window
    let rho = growth_budget(spec, k, k.powf(spec.p_conj - 1.0) * std::f64::consts::E) + 1.0;
    let tau = spec.horizon.min(1.0 / ((spec.p_conj - 1.0) * rho));

    let power_form_nonlinearity = spec.nonlinearity.is_power_form();
    let super_tau = if power_form_nonlinearity {
        spec.horizon
    } else {
        tau
    };
    let warning = if power_form_nonlinearity {
        None
    } else {
        Some(
            "custom nonlinearity: supersolution certified only while \
             (p'-1)*rho*t <= 1"
                .to_string(),
        )
    };

    let upper = BarrierFamily {
        form: BarrierForm::Power { k, rho },
        sign: BarrierSign::Super,
        p: spec.p,
        tau_valid: super_tau,
        warning: warning.clone(),
    };
    let lower = BarrierFamily {
        form: BarrierForm::Power { k, rho },
        sign: BarrierSign::Sub,
        p: spec.p,
        tau_valid: tau,
        warning,
    };
    Ok((lower, upper))
}

/// Builds the envelope subsolution at level `ε`, with
/// `M_ε = max(|ψ|, |χ|, |γ|) − ε(1+|x|²)^{p/2}` sampled and clamped, and
/// the rate dominated through the coercivity split.
pub fn build_eps_subsolution(spec: &ProblemSpec, eps: f64) -> Result<BarrierFamily, BarrierError> {
    assert!(eps > 0.0);
    let c = &spec.constants;
    let (chi, gamma) = match (&c.chi, &c.gamma) {
        (Some(chi), Some(gamma)) => (chi, gamma),
        _ => return Err(BarrierError::MissingEnvelopes),
    };
    let p = spec.p;
    let m_eps = {
        let radius = 32.0;
        let mut worst = 0.0f64;
        let samples = if spec.space_dim == 1 { 4096 } else { 128 };
        let mut scan = |x: &[f64]| {
            let datum = (spec.initial)(x).abs().max(chi(x).abs()).max(gamma(x).abs());
            worst = worst.max(datum - eps * envelope(p, x));
        };
        if spec.space_dim == 1 {
            for i in 0..=samples {
                scan(&[-radius + 2.0 * radius * i as f64 / samples as f64]);
            }
        } else {
            for i in 0..=samples {
                for j in 0..=samples {
                    scan(&[
                        -radius + 2.0 * radius * i as f64 / samples as f64,
                        -radius + 2.0 * radius * j as f64 / samples as f64,
                    ]);
                }
            }
        }
        worst.max(0.0)
    };

    let rho = eps_subsolution_rate(spec, eps, m_eps)?;
    let tau = spec.horizon.min(1.0 / ((spec.p_conj - 1.0) * rho));
    Ok(BarrierFamily {
        form: BarrierForm::EpsFamily { eps, m_eps, rho },
        sign: BarrierSign::Sub,
        p,
        tau_valid: tau,
        warning: None,
    })
}

/// Rate budget for the envelope subsolution; controlled problems with
/// control-growing diffusion additionally split the quadratic trace term
/// against the coercive `ν|α|^p`, which bounds the admissible `ε` at
/// `p = 2` and is impossible below it.
fn eps_subsolution_rate(spec: &ProblemSpec, eps: f64, m_eps: f64) -> Result<f64, BarrierError> {
    let c = &spec.constants;
    let p = spec.p;
    let p_conj = spec.p_conj;
    let m_p = 1.0f64.max(p - 1.0);
    // e^{ρt} <= e^{1/(p'−1)} and e^{(p'−1)ρt} <= e on [0, τ]
    let e_plain = (1.0 / (p_conj - 1.0)).exp();
    let e_conj = std::f64::consts::E;

    let mut rho = 2f64.sqrt() * p * c.c_b // drift, state part
        + 1.0                            // running-cost envelope χ
        + c.c_f
            * (1.0 / (m_eps + eps)
                + 2.0
                + c.c_s.powf(p_conj) * p.powf(p_conj) * eps.powf(p_conj - 1.0) * e_conj);

    match &spec.coefficients {
        Coefficients::Model { .. } => {
            rho += 2.0 * spec.space_dim as f64 * p * m_p * c.c_sigma * c.c_sigma;
        }
        Coefficients::Controlled { .. } => {
            if !(c.nu > 0.0) {
                return Err(BarrierError::InfeasibleCoercivity(format!(
                    "nu = {} must be positive",
                    c.nu
                )));
            }
            // drift, control part: |α|P^{p−1} <= δ|α|^p + c(δ)P^p
            if c.c_b > 0.0 {
                let lead = c.c_b * eps * p * e_plain;
                let delta = c.nu / (4.0 * lead);
                rho += p * c.c_b * young_rest(delta, p);
            }
            // trace, control part: |α|²P^{p−2} against ν|α|^p
            let lead = 3.0 * c.c_sigma * c.c_sigma * eps * p * m_p * e_plain;
            if lead > 0.0 {
                if p > 2.0 {
                    let delta = c.nu / (4.0 * lead);
                    rho += 3.0 * p * m_p * c.c_sigma * c.c_sigma * young_rest_half(delta, p);
                } else if (p - 2.0).abs() <= 1e-12 {
                    if lead > c.nu / 4.0 {
                        return Err(BarrierError::InfeasibleEps {
                            eps,
                            max_eps: eps * (c.nu / 4.0) / lead,
                        });
                    }
                } else {
                    return Err(BarrierError::InfeasibleCoercivity(format!(
                        "p = {p} < 2 with diffusion growing linearly in the control"
                    )));
                }
            }
            // trace, state part
            rho += 3.0 * p * m_p * c.c_sigma * c.c_sigma;
        }
    }
    Ok(rho + 1.0)
}

/// `ab ≤ δa^p + C(δ) b^{p'}` rest constant for exponent pair `(p, p')`.
fn young_rest(delta: f64, p: f64) -> f64 {
    let p_conj = p / (p - 1.0);
    (1.0 / p_conj) * (delta * p).powf(-p_conj / p)
}

/// Rest constant for the pair `(p/2, p/(p−2))`, `p > 2`.
fn young_rest_half(delta: f64, p: f64) -> f64 {
    let r = p / 2.0;
    let r_conj = p / (p - 2.0);
    (1.0 / r_conj) * (delta * r).powf(-r_conj / r)
}

/// The composite strict supersolution `Φ(x,t) = φ_R(h(x), Ct)` with scale
/// and rate chosen above the operator coefficients; valid on `(0, 1/L]`.
pub struct StrictSupersolution {
    pub barrier: BarrierFamily,
    /// Change of functions whose `l_rate` is the computed `L(μ)`.
    pub cf: ChangeOfFunctions,
    pub big_c: f64,
    pub mu: f64,
}

pub fn build_strict_supersolution(
    cf: &ChangeOfFunctions,
    spec: &ProblemSpec,
    r_level: f64,
    mu: f64,
) -> Result<StrictSupersolution, BarrierError> {
    assert!(mu > 0.0 && mu < 1.0);
    let c = &spec.constants;
    let p = spec.p;
    let p_conj = spec.p_conj;
    let n = spec.space_dim as f64;
    let m_p = 1.0f64.max(p - 1.0);

    let big_c = (2.0 * n * p * m_p * c.c_sigma * c.c_sigma + 2f64.sqrt() * p * c.c_b)
        .max(2.0 * p * p * c.c_sigma * c.c_sigma)
        + 1.0;
    // the radial derivative stays below e^{t̂} on the window t̂ <= max(T, 1)
    let phi_r_bound = spec.horizon.max(1.0).exp();
    let l_mu = 4.0 * c.c_f / cf.cbar
        + 4.0
            * p.powf(p_conj)
            * c.c_s.powf(p_conj)
            * cf.cbar.powf(p_conj - 1.0)
            * p_conj.exp()
            * (phi_r_bound / (1.0 - mu) + 1.0).powf(p_conj)
        + 1.0;
    let l_rate = l_mu
        .max(ChangeOfFunctions::fix_l(p, spec.space_dim, c.c_sigma, c.c_b, c.c_hat))
        + 1.0;

    let tau_valid = 1.0 / l_rate;
    let warning = if tau_valid < 1e-9 {
        Some(format!(
            "mu = {mu} pushes the rate to {l_rate:e}; the validity window is \
             practically empty"
        ))
    } else {
        None
    };

    let mut cf_out = *cf;
    cf_out.l_rate = l_rate;
    let aux = AuxiliarySolution::new(r_level, 1024)?;
    Ok(StrictSupersolution {
        barrier: BarrierFamily {
            form: BarrierForm::PhiComposite {
                aux,
                big_c,
                cf: cf_out,
            },
            sign: BarrierSign::Super,
            p,
            tau_valid,
            warning,
        },
        cf: cf_out,
        big_c,
        mu,
    })
}

/// One evaluated sample of a residual check.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualSample {
    pub point: Vec<f64>,
    pub time: f64,
    pub residual: f64,
    pub witness_control: Option<Vec<f64>>,
}

/// Aggregated residual evidence with the ten worst offenders retained.
#[derive(Debug, Serialize)]
pub struct ResidualReport {
    pub check: String,
    pub samples: usize,
    pub min_residual: f64,
    pub max_residual: f64,
    pub worst_violation: f64,
    pub top_offenders: Vec<ResidualSample>,
}

impl ResidualReport {
    fn collect(
        check: String,
        mut samples: Vec<ResidualSample>,
        violation_of: impl Fn(&ResidualSample) -> f64,
    ) -> ResidualReport {
        let min_residual = samples.iter().map(|s| s.residual).fold(f64::INFINITY, f64::min);
        let max_residual = samples
            .iter()
            .map(|s| s.residual)
            .fold(f64::NEG_INFINITY, f64::max);
        let worst_violation = samples.iter().map(&violation_of).fold(0.0f64, f64::max);
        samples.sort_by(|a, b| violation_of(b).total_cmp(&violation_of(a)));
        samples.truncate(10);
        ResidualReport {
            check,
            samples: 0,
            min_residual,
            max_residual,
            worst_violation,
            top_offenders: samples,
        }
    }

    pub fn passed(&self) -> bool {
        self.worst_violation <= 0.0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckRole {
    Sub,
    Super,
}

/// Model-form residual `φ_t − Tr(σσᵀD²φ) + ⟨b,Dφ⟩ + f(x,t,φ,sDφ)` of a
/// smooth candidate.
pub fn model_residual(spec: &ProblemSpec, cand: &BarrierFamily, x: &[f64], t: f64) -> f64 {
    let grad = cand.gradient(x, t);
    let hess = cand.hessian(x, t);
    let gram = spec.model_diffusion_gram(x, t);
    let b = spec.model_drift(x, t);
    let z = (spec.gradient_weight)(x, t).mul_vec(&grad);
    cand.time_derivative(x, t) - gram.trace_product(&hess)
        + dot(&b, &grad)
        + spec.nonlinearity.eval(x, t, cand.value(x, t), &z)
}

/// Controlled-form residual `φ_t + H(x,t,Dφ,D²φ) + f(x,t,φ,sDφ)` together
/// with the maximizing control when one exists.
fn controlled_residual(
    spec: &ProblemSpec,
    cand: &BarrierFamily,
    x: &[f64],
    t: f64,
) -> Result<(ExtendedReal, Option<Vec<f64>>), BarrierError> {
    let grad = cand.gradient(x, t);
    let hess = cand.hessian(x, t);
    let h = hamiltonian_eval(spec, x, t, &grad, &hess)?;
    let z = (spec.gradient_weight)(x, t).mul_vec(&grad);
    let f_val = spec.nonlinearity.eval(x, t, cand.value(x, t), &z);
    let base = cand.time_derivative(x, t) + f_val;
    let witness = hamiltonian_witness(spec, x, t, &grad, &hess)?;
    Ok((ExtendedReal::Finite(base) + h, witness))
}

/// Maximizing control of the Hamiltonian supremum (closed form for the
/// registered family, coarse grid with refinement otherwise).
fn hamiltonian_witness(
    spec: &ProblemSpec,
    x: &[f64],
    t: f64,
    q: &[f64],
    hess: &Mat,
) -> Result<Option<Vec<f64>>, BarrierError> {
    let (drift, diffusion, running_cost, control_dim, family) = match &spec.coefficients {
        Coefficients::Controlled {
            drift,
            diffusion,
            running_cost,
            control_dim,
            family,
        } => (drift, diffusion, running_cost, *control_dim, *family),
        Coefficients::Model { .. } => return Ok(None),
    };
    if let ControlFamily::LqIsotropic { nu, trace_weight } = family {
        let tr: f64 = (0..hess.rows).map(|i| hess.get(i, i)).sum();
        let denom = nu + trace_weight * tr;
        if denom > 0.0 {
            return Ok(Some(q.iter().map(|v| -v / (2.0 * denom)).collect()));
        }
        return Ok(None);
    }
    // coarse grid then golden refinement per axis
    let a_max = control_radius(spec, q, hess)?;
    let objective = |alpha: &[f64]| -> f64 {
        let b = drift(x, t, alpha);
        let gram = diffusion(x, t, alpha).gram();
        -dot(&b, q) - running_cost(x, t, alpha) - gram.trace_product(hess)
    };
    let pts = 33usize;
    let mut best = f64::NEG_INFINITY;
    let mut best_alpha = vec![0.0; control_dim];
    let mut idx = vec![0usize; control_dim];
    'outer: loop {
        let alpha: Vec<f64> = idx
            .iter()
            .map(|&i| -a_max + 2.0 * a_max * i as f64 / (pts - 1) as f64)
            .collect();
        let v = objective(&alpha);
        if v > best {
            best = v;
            best_alpha = alpha;
        }
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < pts {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == control_dim {
                break 'outer;
            }
        }
    }
    let cell = 2.0 * a_max / (pts - 1) as f64;
    for axis in 0..control_dim {
        let lo = (best_alpha[axis] - cell).max(-a_max);
        let hi = (best_alpha[axis] + cell).min(a_max);
        let mut probe = best_alpha.clone();
        let arg = crate::util::golden_min(lo, hi, 1e-9 * a_max.max(1.0), |v| {
            probe[axis] = v;
            -objective(&probe)
        });
        best_alpha[axis] = arg;
    }
    Ok(Some(best_alpha))
}

/// Checks the defining sub/supersolution inequality of a smooth candidate
/// at random space-time samples inside radius `radius` and `t ≤ τ_valid`.
///
/// Subsolution checks require the residual `≤ 0` uniformly over controls
/// (the supremum form); supersolution checks search for a control witness
/// within absolute slack `eta` and fail with the best candidate when none
/// reaches it.
pub fn viscosity_residual_check(
    cand: &BarrierFamily,
    spec: &ProblemSpec,
    role: CheckRole,
    eta: f64,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<ResidualReport, BarrierError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut collected = Vec::with_capacity(samples);
    let controlled = spec.is_controlled();
    let t_top = cand.tau_valid.min(spec.horizon);

    for _ in 0..samples {
        let x: Vec<f64> = (0..spec.space_dim)
            .map(|_| rng.gen_range(-radius..radius))
            .collect();
        let t = rng.gen_range(0.0..t_top);
        if controlled {
            let (value, witness) = controlled_residual(spec, cand, &x, t)?;
            match value {
                ExtendedReal::Finite(residual) => {
                    if role == CheckRole::Super && residual < -eta {
                        return Err(BarrierError::NoWitnessFound {
                            point: x,
                            time: t,
                            best_value: residual,
                            best_control: witness.unwrap_or_default(),
                        });
                    }
                    collected.push(ResidualSample {
                        point: x,
                        time: t,
                        residual,
                        witness_control: witness,
                    });
                }
                ExtendedReal::PosInfinity => match role {
                    // an infinite supremum certifies the supersolution
                    // inequality with any slack
                    CheckRole::Super => collected.push(ResidualSample {
                        point: x,
                        time: t,
                        residual: f64::INFINITY,
                        witness_control: None,
                    }),
                    CheckRole::Sub => collected.push(ResidualSample {
                        point: x,
                        time: t,
                        residual: f64::INFINITY,
                        witness_control: None,
                    }),
                },
            }
        } else {
            let residual = model_residual(spec, cand, &x, t);
            if role == CheckRole::Super && residual < -eta {
                return Err(BarrierError::NoWitnessFound {
                    point: x,
                    time: t,
                    best_value: residual,
                    best_control: Vec::new(),
                });
            }
            collected.push(ResidualSample {
                point: x,
                time: t,
                residual,
                witness_control: None,
            });
        }
    }

    let count = collected.len();
    let mut report = match role {
        CheckRole::Sub => ResidualReport::collect(
            format!("subsolution residual <= 0 ({} samples)", count),
            collected,
            |s| s.residual.max(0.0),
        ),
        CheckRole::Super => ResidualReport::collect(
            format!("supersolution residual >= -eta ({} samples)", count),
            collected,
            |s| (-s.residual - eta).max(0.0),
        ),
    };
    report.samples = count;
    Ok(report)
}

/// Evaluates the linearized comparison operator at the composite barrier:
/// `ℒ[Φ] = Φ_t − Tr(σσᵀD²Φ) − C_b(1+|x|)|DΦ| + (L/4)(1−μ)h
///          − (1−μ)e^{−Lt} f(x,t,0, e^{Lt}s(DΦ/(μ−1) − Dh))`,
/// sampled on `t ∈ (0, 1/L]`; the construction certifies a positive
/// minimum for proof-compliant parameters.
pub fn check_linearized_operator(
    sup: &StrictSupersolution,
    spec: &ProblemSpec,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<ResidualReport, BarrierError> {
    let cand = &sup.barrier;
    match cand.form {
        BarrierForm::PhiComposite { .. } => {}
        _ => {
            return Err(BarrierError::DerivativeUnavailable(
                "linearized check needs the composite barrier".into(),
            ))
        }
    }
    let cf = &sup.cf;
    let l_rate = cf.l_rate;
    let mu = sup.mu;
    let c_b = spec.constants.c_b;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut collected = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x: Vec<f64> = (0..spec.space_dim)
            .map(|_| rng.gen_range(-radius..radius))
            .collect();
        let t = rng.gen_range(1e-9..1.0 / l_rate);
        let value = linearized_operator(sup, spec, &x, t, mu, l_rate, c_b);
        collected.push(ResidualSample {
            point: x,
            time: t,
            residual: value,
            witness_control: None,
        });
    }
    let count = collected.len();
    let mut report = ResidualReport::collect(
        format!("linearized operator > 0 ({count} samples)"),
        collected,
        |s| (-s.residual).max(0.0),
    );
    report.samples = count;
    Ok(report)
}

fn linearized_operator(
    sup: &StrictSupersolution,
    spec: &ProblemSpec,
    x: &[f64],
    t: f64,
    mu: f64,
    l_rate: f64,
    c_b: f64,
) -> f64 {
    let cand = &sup.barrier;
    let cf = &sup.cf;
    let grad = cand.gradient(x, t);
    let hess = cand.hessian(x, t);
    let gram = spec.model_diffusion_gram(x, t);
    let h = cf.h(x);
    let dh = cf.grad_h(x);
    let el = (l_rate * t).exp();
    let arg: Vec<f64> = grad
        .iter()
        .zip(&dh)
        .map(|(g, d)| el * (g / (mu - 1.0) - d))
        .collect();
    let weighted = (spec.gradient_weight)(x, t).mul_vec(&arg);
    cand.time_derivative(x, t) - gram.trace_product(&hess)
        - c_b * (1.0 + crate::util::norm(x)) * crate::util::norm(&grad)
        + 0.25 * l_rate * (1.0 - mu) * h
        - (1.0 - mu) / el * spec.nonlinearity.eval(x, t, 0.0, &weighted)
}

/// Nodewise confinement `u̲ ≤ u ≤ ū` of a grid slice between two barriers.
pub fn confined_between(
    state: &GridFunction,
    lower: &BarrierFamily,
    upper: &BarrierFamily,
) -> bool {
    let t = state.time;
    (0..state.grid.node_count()).all(|i| {
        let x = state.grid.point(i);
        let v = state.values[i];
        lower.value(&x, t) - 1e-12 <= v && v <= upper.value(&x, t) + 1e-12
    })
}
