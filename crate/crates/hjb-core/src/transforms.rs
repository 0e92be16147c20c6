//! Exponential-in-time change of unknown `ũ = e^{−Lt}u + h(x)` with
//! `h(x) = C̄(1+|x|²)^{p/2}`, the induced nonlinearity, and the convex
//! combination inequality used throughout the residual estimates.
//!
//! The smooth envelope `(1+|x|²)^{p/2}` replaces `1+|x|^p` so that two
//! derivatives exist everywhere, including the origin for `p < 2`; the two
//! envelopes agree within fixed constant factors.

use crate::problem::ProblemSpec;
use crate::util::{dot, outer, Mat};

/// Parameters of the change of unknown. `h(0) = C̄` and `h ≥ C̄ > 0`.
#[derive(Clone, Copy, Debug)]
pub struct ChangeOfFunctions {
    /// Exponential rate `L > 0`.
    pub l_rate: f64,
    /// Envelope constant `C̄ > 0`.
    pub cbar: f64,
    /// Growth exponent `p > 1`.
    pub p: f64,
}

impl ChangeOfFunctions {
    /// `h(x) = C̄ (1+|x|²)^{p/2}`.
    pub fn h(&self, x: &[f64]) -> f64 {
        self.cbar * (1.0 + dot(x, x)).powf(self.p / 2.0)
    }

    /// `Dh(x) = p C̄ (1+|x|²)^{p/2−1} x`.
    pub fn grad_h(&self, x: &[f64]) -> Vec<f64> {
        let factor = self.p * self.cbar * (1.0 + dot(x, x)).powf(self.p / 2.0 - 1.0);
        x.iter().map(|v| factor * v).collect()
    }

    /// `D²h(x) = p C̄ [(1+|x|²)^{p/2−1} I + (p−2)(1+|x|²)^{p/2−2} x⊗x]`.
    pub fn hess_h(&self, x: &[f64]) -> Mat {
        let n = x.len();
        let q = 1.0 + dot(x, x);
        let a = self.p * self.cbar * q.powf(self.p / 2.0 - 1.0);
        let b = self.p * self.cbar * (self.p - 2.0) * q.powf(self.p / 2.0 - 2.0);
        let mut m = outer(x);
        for v in m.data.iter_mut() {
            *v *= b;
        }
        for i in 0..n {
            m.set(i, i, m.get(i, i) + a);
        }
        m
    }

    /// Selects `C̄` strictly above twice the largest bounded-class constant
    /// among the data entering the comparison argument.
    pub fn fix_cbar(bound_constants: &[f64]) -> f64 {
        2.0 * bound_constants.iter().fold(0.0f64, |m, &c| m.max(c)) + 1.0
    }

    /// Selects the rate strictly above both monotonicity thresholds.
    pub fn fix_l(p: f64, dim: usize, c_sigma: f64, c_b: f64, c_hat: f64) -> f64 {
        let n = dim as f64;
        c_hat
            .max(4.0 * p * (p - 1.0) * n * c_sigma * c_sigma + 4.0 * p * c_b + 10.0 * c_hat)
            + 1.0
    }
}

/// `ũ = e^{−Lt} u + h(x)`.
pub fn forward_transform(cf: &ChangeOfFunctions, u: f64, x: &[f64], t: f64) -> f64 {
    (-cf.l_rate * t).exp() * u + cf.h(x)
}

/// Inverse of [`forward_transform`]: `u = e^{Lt}(ũ − h(x))`.
pub fn inverse_transform(cf: &ChangeOfFunctions, u_tilde: f64, x: &[f64], t: f64) -> f64 {
    (cf.l_rate * t).exp() * (u_tilde - cf.h(x))
}

/// The nonlinearity of the transformed equation:
/// `f̃(x,t,v,z) = Lv + g̃(x,t) + e^{−Lt} f(x,t,e^{Lt}v, e^{Lt}z)` with
/// `g̃ = Tr(σσᵀ D²h) − ⟨b, Dh⟩`.
pub fn transformed_nonlinearity(
    cf: &ChangeOfFunctions,
    spec: &ProblemSpec,
    x: &[f64],
    t: f64,
    v: f64,
    z: &[f64],
) -> f64 {
    let el = (cf.l_rate * t).exp();
    let gram = spec.model_diffusion_gram(x, t);
    let g_tilde =
        gram.trace_product(&cf.hess_h(x)) - dot(&spec.model_drift(x, t), &cf.grad_h(x));
    let scaled: Vec<f64> = z.iter().map(|w| el * w).collect();
    cf.l_rate * v + g_tilde + spec.nonlinearity.eval(x, t, el * v, &scaled) / el
}

/// Both sides of the convex combination inequality
/// `−μΨ(ξ) + Ψ(ζ) ≤ (1−μ)Ψ((μξ−ζ)/(μ−1))` for convex `Ψ` and `μ ∈ (0,1)`.
pub fn convex_combination_bound(
    psi: impl Fn(&[f64]) -> f64,
    mu: f64,
    xi: &[f64],
    zeta: &[f64],
) -> (f64, f64) {
    assert!(mu > 0.0 && mu < 1.0);
    let lhs = -mu * psi(xi) + psi(zeta);
    let arg: Vec<f64> = xi
        .iter()
        .zip(zeta)
        .map(|(a, b)| (mu * a - b) / (mu - 1.0))
        .collect();
    let rhs = (1.0 - mu) * psi(&arg);
    (lhs, rhs)
}
