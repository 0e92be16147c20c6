//! Manufactured smooth solutions with hand-coded derivatives, and the
//! forcing that makes each one solve the model equation exactly.

use crate::problem::ProblemSpec;
use crate::util::{dot, outer, Mat};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManufacturedError {
    #[error(
        "unknown manufactured kind {0:?}; valid: gaussian_decay, polynomial_p_growth, separated_sine"
    )]
    UnknownKind(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ManufacturedKind {
    GaussianDecay,
    PolynomialPGrowth,
    SeparatedSine,
}

impl FromStr for ManufacturedKind {
    type Err = ManufacturedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian_decay" => Ok(ManufacturedKind::GaussianDecay),
            "polynomial_p_growth" => Ok(ManufacturedKind::PolynomialPGrowth),
            "separated_sine" => Ok(ManufacturedKind::SeparatedSine),
            other => Err(ManufacturedError::UnknownKind(other.to_string())),
        }
    }
}

/// Shape parameters of the manufactured candidates.
#[derive(Clone, Debug)]
pub struct ManufacturedParams {
    /// Amplitude of the solution.
    pub amplitude: f64,
    /// Wave vector of the separated sine.
    pub wave: Vec<f64>,
    /// Growth exponent for the polynomial kind.
    pub p: f64,
}

impl ManufacturedParams {
    pub fn default_for(dim: usize) -> Self {
        ManufacturedParams {
            amplitude: 1.0,
            wave: vec![1.0; dim],
            p: 2.0,
        }
    }
}

/// A smooth candidate with closed-form derivatives.
#[derive(Clone)]
pub struct ManufacturedSolution {
    pub kind: ManufacturedKind,
    params: ManufacturedParams,
}

/// Builds the candidate and the forcing closure making it solve the model
/// equation of `spec` exactly (the forcing is the operator applied to the
/// exact solution, assembled from the closed-form derivatives).
pub fn manufactured_solution(
    kind: ManufacturedKind,
    params: ManufacturedParams,
    spec: &ProblemSpec,
) -> (ManufacturedSolution, impl Fn(&[f64], f64) -> f64 + '_) {
    let sol = ManufacturedSolution {
        kind,
        params: params.clone(),
    };
    let eval = ManufacturedSolution { kind, params };
    let forcing = move |x: &[f64], t: f64| -> f64 {
        let u = eval.value(x, t);
        let du = eval.gradient(x, t);
        let d2u = eval.hessian(x, t);
        let ut = eval.dt(x, t);
        let gram = spec.model_diffusion_gram(x, t);
        let b = spec.model_drift(x, t);
        let z = (spec.gradient_weight)(x, t).mul_vec(&du);
        ut - gram.trace_product(&d2u) + dot(&b, &du) + spec.nonlinearity.eval(x, t, u, &z)
    };
    (sol, forcing)
}

impl ManufacturedSolution {
    pub fn new(kind: ManufacturedKind, params: ManufacturedParams) -> Self {
        ManufacturedSolution { kind, params }
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        let p = &self.params;
        match self.kind {
            // A e^{−|k|² t} sin(⟨k,x⟩)
            ManufacturedKind::SeparatedSine => {
                let k2 = dot(&p.wave, &p.wave);
                p.amplitude * (-k2 * t).exp() * dot(&p.wave, x).sin()
            }
            // A (1+|x|²)^{p/2} (1+t)
            ManufacturedKind::PolynomialPGrowth => {
                p.amplitude * (1.0 + dot(x, x)).powf(p.p / 2.0) * (1.0 + t)
            }
            // A e^{−|x|² − t}
            ManufacturedKind::GaussianDecay => p.amplitude * (-dot(x, x) - t).exp(),
        }
    }

    pub fn gradient(&self, x: &[f64], t: f64) -> Vec<f64> {
        let p = &self.params;
        match self.kind {
            ManufacturedKind::SeparatedSine => {
                let k2 = dot(&p.wave, &p.wave);
                let c = p.amplitude * (-k2 * t).exp() * dot(&p.wave, x).cos();
                p.wave.iter().map(|k| c * k).collect()
            }
            ManufacturedKind::PolynomialPGrowth => {
                let c =
                    p.amplitude * p.p * (1.0 + dot(x, x)).powf(p.p / 2.0 - 1.0) * (1.0 + t);
                x.iter().map(|v| c * v).collect()
            }
            ManufacturedKind::GaussianDecay => {
                let v = self.value(x, t);
                x.iter().map(|xi| -2.0 * xi * v).collect()
            }
        }
    }

    pub fn hessian(&self, x: &[f64], t: f64) -> Mat {
        let n = x.len();
        let p = &self.params;
        match self.kind {
            ManufacturedKind::SeparatedSine => {
                let mut m = outer(&p.wave);
                let v = self.value(x, t);
                for e in m.data.iter_mut() {
                    *e *= -v;
                }
                m
            }
            ManufacturedKind::PolynomialPGrowth => {
                let q = 1.0 + dot(x, x);
                let a = p.amplitude * p.p * q.powf(p.p / 2.0 - 1.0) * (1.0 + t);
                let b = p.amplitude * p.p * (p.p - 2.0) * q.powf(p.p / 2.0 - 2.0) * (1.0 + t);
                let mut m = outer(x);
                for e in m.data.iter_mut() {
                    *e *= b;
                }
                for i in 0..n {
                    m.set(i, i, m.get(i, i) + a);
                }
                m
            }
            ManufacturedKind::GaussianDecay => {
                let v = self.value(x, t);
                let mut m = outer(x);
                for e in m.data.iter_mut() {
                    *e *= 4.0 * v;
                }
                for i in 0..n {
                    m.set(i, i, m.get(i, i) - 2.0 * v);
                }
                m
            }
        }
    }

    pub fn dt(&self, x: &[f64], t: f64) -> f64 {
        let p = &self.params;
        match self.kind {
            ManufacturedKind::SeparatedSine => {
                let k2 = dot(&p.wave, &p.wave);
                -k2 * self.value(x, t)
            }
            ManufacturedKind::PolynomialPGrowth => {
                p.amplitude * (1.0 + dot(x, x)).powf(p.p / 2.0)
            }
            ManufacturedKind::GaussianDecay => -self.value(x, t),
        }
    }
}
