//! Problem instances: coefficient fields, structural constants and presets.
//!
//! An instance describes the initial-value problem
//!
//! ```text
//!     u_t + H(x,t,Du,D²u) + f(x,t,u,s(x,t)Du) = 0,    u(·,0) = ψ,
//! ```
//!
//! either in controlled form, where `H` is a supremum over an unbounded
//! control set of `−⟨b,q⟩ − ℓ − Tr(σσᵀX)`, or in the control-independent
//! model form
//!
//! ```text
//!     u_t − Tr(σσᵀD²u) + ⟨b,Du⟩ + f(x,t,u,sDu) = 0.
//! ```

use crate::util::Mat;
use serde::Deserialize;
use thiserror::Error;

pub type SpaceScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type SpaceTimeScalarFn = Box<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type SpaceTimeVectorFn = Box<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;
pub type SpaceTimeMatrixFn = Box<dyn Fn(&[f64], f64) -> Mat + Send + Sync>;
pub type ControlledVectorFn = Box<dyn Fn(&[f64], f64, &[f64]) -> Vec<f64> + Send + Sync>;
pub type ControlledMatrixFn = Box<dyn Fn(&[f64], f64, &[f64]) -> Mat + Send + Sync>;
pub type ControlledScalarFn = Box<dyn Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync>;
/// Full nonlinearity signature `f(x, t, u, z)`.
pub type NonlinearityFn = Box<dyn Fn(&[f64], f64, f64, &[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown preset {given:?}; valid presets are {valid:?}")]
    UnknownPreset {
        given: String,
        valid: Vec<&'static str>,
    },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("conjugate exponent mismatch: 1/p + 1/p' = {sum}, expected 1")]
    ConjugateExponent { sum: f64 },
    #[error("malformed problem document: {0}")]
    Json(#[from] serde_json::Error),
}

/// Structural constants of the growth and regularity hypotheses, plus the
/// optional strict-growth envelopes used by the subsolution construction.
pub struct AssumptionConstants {
    /// Drift growth/Lipschitz constant.
    pub c_b: f64,
    /// Diffusion growth/Lipschitz constant.
    pub c_sigma: f64,
    /// Running-cost upper growth constant.
    pub c_ell: f64,
    /// Coercivity constant of the running cost (must be positive).
    pub nu: f64,
    /// Growth constant of the nonlinearity `f`.
    pub c_f: f64,
    /// Bound and Lipschitz constant of the gradient weight `s`.
    pub c_s: f64,
    /// Lipschitz constant of `f` in the solution variable.
    pub c_hat: f64,
    /// Strict envelope dominating the running cost defect: `ℓ ≥ ν|α|^p − χ`.
    pub chi: Option<SpaceScalarFn>,
    /// Strict envelope entering the growth bound of `f`.
    pub gamma: Option<SpaceScalarFn>,
}

impl AssumptionConstants {
    pub fn all_finite(&self) -> bool {
        [
            self.c_b,
            self.c_sigma,
            self.c_ell,
            self.nu,
            self.c_f,
            self.c_s,
            self.c_hat,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Coefficient family of the second-order operator.
pub enum Coefficients {
    /// Control-independent model form: `b(x,t)`, `σ(x,t)`.
    Model {
        drift: SpaceTimeVectorFn,
        diffusion: SpaceTimeMatrixFn,
    },
    /// Controlled form: `b(x,t,α)`, `σ(x,t,α)`, `ℓ(x,t,α)` over an unbounded
    /// control set truncated per evaluation by coercivity.
    Controlled {
        drift: ControlledVectorFn,
        diffusion: ControlledMatrixFn,
        running_cost: ControlledScalarFn,
        control_dim: usize,
        family: ControlFamily,
    },
}

/// Marks coefficient families with a registered closed form for the
/// control supremum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ControlFamily {
    /// `b = α`, `ℓ = ν|α|²`, `σσᵀ = w|α|² I`: the supremum is a rational
    /// function of `q` and `Tr X`, infinite when `ν + w·Tr X < 0`.
    LqIsotropic { nu: f64, trace_weight: f64 },
    /// No registered form; evaluation falls back to a coercivity-bounded
    /// grid search with divergence probing.
    GridSearch,
}

/// The gradient nonlinearity `f(x,t,u,z)`.
pub enum Nonlinearity {
    /// `weight·|z|^exponent + u_coeff·u + source(x,t)`; convex in `z` when
    /// `weight ≥ 0`. The power structure is exploited by the scheme for
    /// closed-form monotone fluxes.
    PowerForm {
        weight: f64,
        exponent: f64,
        u_coeff: f64,
        source: Option<SpaceTimeScalarFn>,
    },
    Custom(NonlinearityFn),
}

impl Nonlinearity {
    pub fn eval(&self, x: &[f64], t: f64, u: f64, z: &[f64]) -> f64 {
        match self {
            Nonlinearity::PowerForm {
                weight,
                exponent,
                u_coeff,
                source,
            } => {
                let zn = crate::util::norm(z);
                let mut v = weight * zn.powf(*exponent) + u_coeff * u;
                if let Some(g) = source {
                    v += g(x, t);
                }
                v
            }
            Nonlinearity::Custom(f) => f(x, t, u, z),
        }
    }

    pub fn is_power_form(&self) -> bool {
        matches!(self, Nonlinearity::PowerForm { .. })
    }
}

/// One fully specified problem instance.
pub struct ProblemSpec {
    pub space_dim: usize,
    /// Growth exponent of data and solutions, `p > 1`.
    pub p: f64,
    /// Conjugate exponent `p' = p/(p−1)`.
    pub p_conj: f64,
    pub coefficients: Coefficients,
    /// Gradient weight `s(x,t)`, an `N×N` matrix field.
    pub gradient_weight: SpaceTimeMatrixFn,
    pub nonlinearity: Nonlinearity,
    /// Initial datum `ψ`.
    pub initial: SpaceScalarFn,
    pub horizon: f64,
    pub constants: AssumptionConstants,
    /// Preset name when built from the registry.
    pub preset: Option<&'static str>,
}

impl ProblemSpec {
    /// Checks the exact conjugate-exponent identity `1/p + 1/p' = 1`.
    pub fn check_conjugate(p: f64, p_conj: f64) -> Result<(), ProblemError> {
        let sum = 1.0 / p + 1.0 / p_conj;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(ProblemError::ConjugateExponent { sum });
        }
        Ok(())
    }

    pub fn is_controlled(&self) -> bool {
        matches!(self.coefficients, Coefficients::Controlled { .. })
    }

    /// Drift evaluated in model form. Panics on controlled instances.
    pub fn model_drift(&self, x: &[f64], t: f64) -> Vec<f64> {
        match &self.coefficients {
            Coefficients::Model { drift, .. } => drift(x, t),
            _ => panic!("model_drift on a controlled problem"),
        }
    }

    /// Diffusion matrix `σ(x,t)` in model form. Panics on controlled instances.
    pub fn model_diffusion(&self, x: &[f64], t: f64) -> Mat {
        match &self.coefficients {
            Coefficients::Model { diffusion, .. } => diffusion(x, t),
            _ => panic!("model_diffusion on a controlled problem"),
        }
    }

    /// `σσᵀ(x,t)` in model form.
    pub fn model_diffusion_gram(&self, x: &[f64], t: f64) -> Mat {
        self.model_diffusion(x, t).gram()
    }

    /// Builds an instance from a named preset and numeric overrides.
    pub fn from_preset(name: &str, params: &PresetParams) -> Result<ProblemSpec, ProblemError> {
        match name {
            "eq3_lq" => presets::eq3_lq(params),
            "power_model" => presets::power_model(params),
            "lp_deterministic" => presets::lp_deterministic(params),
            "briand_hu" => presets::briand_hu(params),
            other => Err(ProblemError::UnknownPreset {
                given: other.to_string(),
                valid: PRESET_NAMES.to_vec(),
            }),
        }
    }

    /// Builds an instance from a JSON document
    /// `{"preset": "<name>", "<param>": <number>, ...}`.
    pub fn from_json(doc: &str) -> Result<ProblemSpec, ProblemError> {
        let req: PresetRequest = serde_json::from_str(doc)?;
        ProblemSpec::from_preset(&req.preset, &req.params)
    }
}

pub const PRESET_NAMES: [&str; 4] = ["eq3_lq", "power_model", "lp_deterministic", "briand_hu"];

#[derive(Deserialize)]
struct PresetRequest {
    preset: String,
    #[serde(flatten)]
    params: PresetParams,
}

/// Numeric overrides accepted by the presets. Fields left `None` keep the
/// preset defaults; values outside the preset's domain are rejected.
#[derive(Clone, Debug, Default, Deserialize, serde::Serialize)]
pub struct PresetParams {
    pub p: Option<f64>,
    pub horizon: Option<f64>,
    pub rho: Option<f64>,
    pub space_dim: Option<usize>,
    pub psi_amplitude: Option<f64>,
    pub forcing_amplitude: Option<f64>,
}

impl PresetParams {
    fn dim(&self, default: usize) -> Result<usize, ProblemError> {
        let n = self.space_dim.unwrap_or(default);
        if n == 0 || n > 2 {
            return Err(ProblemError::InvalidParameter {
                name: "space_dim",
                reason: format!("{n} not in {{1, 2}}"),
            });
        }
        Ok(n)
    }

    fn exponent(&self, default: f64) -> Result<f64, ProblemError> {
        let p = self.p.unwrap_or(default);
        if !(p > 1.0) || !p.is_finite() {
            return Err(ProblemError::InvalidParameter {
                name: "p",
                reason: format!("{p} must be > 1"),
            });
        }
        Ok(p)
    }

    fn time_horizon(&self, default: f64) -> Result<f64, ProblemError> {
        let t = self.horizon.unwrap_or(default);
        if !(t > 0.0) || !t.is_finite() {
            return Err(ProblemError::InvalidParameter {
                name: "horizon",
                reason: format!("{t} must be > 0"),
            });
        }
        Ok(t)
    }
}

/// Immutable description of one preset for registry listings.
#[derive(Clone, Debug, serde::Serialize)]
pub struct PresetDescriptor {
    pub name: &'static str,
    pub equation_form: &'static str,
    pub summary: &'static str,
    pub suites: Vec<&'static str>,
    /// The Hamiltonian can evaluate to `+∞` on this preset.
    pub hamiltonian_may_diverge: bool,
    /// Finite-time blow-up studies apply.
    pub blow_up_applicable: bool,
    pub diffusion_identically_zero: bool,
}

/// The fixed table of shipped presets.
pub fn preset_registry() -> Vec<PresetDescriptor> {
    vec![
        PresetDescriptor {
            name: "eq3_lq",
            equation_form: "controlled",
            summary: "stochastic linear-quadratic family: drift = control, \
                      diffusion linear in the control, quadratic running cost",
            suites: vec!["validate", "barriers"],
            hamiltonian_may_diverge: true,
            blow_up_applicable: false,
            diffusion_identically_zero: false,
        },
        PresetDescriptor {
            name: "power_model",
            equation_form: "model",
            summary: "heat operator plus power-of-gradient nonlinearity \
                      u_t - Δu + |Du|^{p'} = -g",
            suites: vec!["validate", "barriers", "solve", "comparison", "convergence"],
            hamiltonian_may_diverge: false,
            blow_up_applicable: false,
            diffusion_identically_zero: false,
        },
        PresetDescriptor {
            name: "lp_deterministic",
            equation_form: "model",
            summary: "first-order deterministic control value equation in \
                      time-reversed form; finite-time blow-up for small rho",
            suites: vec!["validate", "oracles", "solve"],
            hamiltonian_may_diverge: false,
            blow_up_applicable: true,
            diffusion_identically_zero: true,
        },
        PresetDescriptor {
            name: "briand_hu",
            equation_form: "model",
            summary: "backward-SDE shaped semilinear equation with gradient \
                      weight equal to the diffusion",
            suites: vec!["validate", "barriers", "solve"],
            hamiltonian_may_diverge: false,
            blow_up_applicable: false,
            diffusion_identically_zero: false,
        },
    ]
}

mod presets {
    use super::*;

    fn zero_envelope() -> Option<SpaceScalarFn> {
        Some(Box::new(|_: &[f64]| 0.0))
    }

    /// Linear-quadratic controlled family with control-unbounded diffusion.
    pub fn eq3_lq(params: &PresetParams) -> Result<ProblemSpec, ProblemError> {
        let p = params.exponent(2.0)?;
        if (p - 2.0).abs() > 1e-12 {
            return Err(ProblemError::InvalidParameter {
                name: "p",
                reason: "eq3_lq is quadratic; p must equal 2".into(),
            });
        }
        let n = params.dim(1)?;
        let horizon = params.time_horizon(1.0)?;
        let amp = params.psi_amplitude.unwrap_or(0.5);
        let trace_weight = 0.5;

        let drift: ControlledVectorFn = Box::new(|_x, _t, a: &[f64]| a.to_vec());
        let diffusion: ControlledMatrixFn = Box::new(move |_x, _t, a: &[f64]| {
            let r = crate::util::norm(a) / 2f64.sqrt();
            Mat::scaled_identity(a.len(), r)
        });
        let running_cost: ControlledScalarFn =
            Box::new(|_x, _t, a: &[f64]| crate::util::dot(a, a));
        // Sub-quadratic terminal datum: strict-class growth of order 1 < p.
        let initial: SpaceScalarFn =
            Box::new(move |x: &[f64]| amp * (1.0 + crate::util::dot(x, x)).sqrt());

        Ok(ProblemSpec {
            space_dim: n,
            p,
            p_conj: p / (p - 1.0),
            coefficients: Coefficients::Controlled {
                drift,
                diffusion,
                running_cost,
                control_dim: n,
                family: ControlFamily::LqIsotropic {
                    nu: 1.0,
                    trace_weight,
                },
            },
            gradient_weight: Box::new(move |_x, _t| Mat::identity(n)),
            nonlinearity: Nonlinearity::PowerForm {
                weight: 0.0,
                exponent: p / (p - 1.0),
                u_coeff: 0.0,
                source: None,
            },
            initial,
            horizon,
            constants: AssumptionConstants {
                c_b: 1.0,
                c_sigma: (n as f64 / 2.0).sqrt(),
                c_ell: 1.0,
                nu: 1.0,
                c_f: 0.0,
                c_s: (n as f64).sqrt(),
                c_hat: 0.0,
                chi: zero_envelope(),
                gamma: zero_envelope(),
            },
            preset: Some("eq3_lq"),
        })
    }

    /// `u_t − Δu + |Du|^{p'} = −g(x,t)`.
    pub fn power_model(params: &PresetParams) -> Result<ProblemSpec, ProblemError> {
        let p = params.exponent(2.0)?;
        let n = params.dim(1)?;
        let horizon = params.time_horizon(1.0)?;
        let amp = params.psi_amplitude.unwrap_or(1.0);
        let forcing = params.forcing_amplitude.unwrap_or(0.0);
        let p_conj = p / (p - 1.0);

        let source: Option<SpaceTimeScalarFn> = if forcing != 0.0 {
            Some(Box::new(move |x: &[f64], t: f64| {
                forcing * (x[0] + t).cos()
            }))
        } else {
            None
        };

        Ok(ProblemSpec {
            space_dim: n,
            p,
            p_conj,
            coefficients: Coefficients::Model {
                drift: Box::new(move |_x, _t| vec![0.0; n]),
                diffusion: Box::new(move |_x, _t| Mat::identity(n)),
            },
            gradient_weight: Box::new(move |_x, _t| Mat::identity(n)),
            nonlinearity: Nonlinearity::PowerForm {
                weight: 1.0,
                exponent: p_conj,
                u_coeff: 0.0,
                source,
            },
            initial: Box::new(move |x: &[f64]| {
                amp * x.iter().map(|v| v.cos()).product::<f64>()
            }),
            horizon,
            constants: AssumptionConstants {
                c_b: 0.0,
                c_sigma: (n as f64).sqrt(),
                c_ell: 0.0,
                nu: 1.0,
                c_f: 1.0 + forcing.abs(),
                c_s: (n as f64).sqrt(),
                c_hat: 0.0,
                chi: zero_envelope(),
                gamma: Some(Box::new(move |_x: &[f64]| forcing.abs())),
            },
            preset: Some("power_model"),
        })
    }

    /// Time-reversed value equation of the deterministic power-cost control
    /// problem: `u_t + (1/p')|Du/p|^{p'} − ρ|x|^p = 0`, `ψ = −|x|^p`.
    ///
    /// The gradient weight `s = (1/p)·I` makes `φ(t)|x|^p` an exact separated
    /// solution whenever `φ` solves `−φ' + |φ|^{p'}/p' = ρ`.
    pub fn lp_deterministic(params: &PresetParams) -> Result<ProblemSpec, ProblemError> {
        let p = params.exponent(2.0)?;
        let n = params.dim(1)?;
        if n != 1 {
            return Err(ProblemError::InvalidParameter {
                name: "space_dim",
                reason: "lp_deterministic is one-dimensional".into(),
            });
        }
        let horizon = params.time_horizon(5.0)?;
        let rho = params.rho.unwrap_or(0.0);
        if rho < 0.0 || !rho.is_finite() {
            return Err(ProblemError::InvalidParameter {
                name: "rho",
                reason: format!("{rho} must be >= 0"),
            });
        }
        let p_conj = p / (p - 1.0);

        Ok(ProblemSpec {
            space_dim: n,
            p,
            p_conj,
            coefficients: Coefficients::Model {
                drift: Box::new(move |_x, _t| vec![0.0; n]),
                diffusion: Box::new(move |_x, _t| Mat::zeros(n, 1)),
            },
            gradient_weight: Box::new(move |_x, _t| Mat::scaled_identity(n, 1.0 / p)),
            nonlinearity: Nonlinearity::PowerForm {
                weight: 1.0 / p_conj,
                exponent: p_conj,
                u_coeff: 0.0,
                source: Some(Box::new(move |x: &[f64], _t| {
                    -rho * crate::util::norm(x).powf(p)
                })),
            },
            initial: Box::new(move |x: &[f64]| -crate::util::norm(x).powf(p)),
            horizon,
            constants: AssumptionConstants {
                c_b: 0.0,
                c_sigma: 0.0,
                c_ell: 0.0,
                nu: 1.0,
                c_f: (1.0 / p_conj).max(rho),
                c_s: 1.0 / p,
                c_hat: 0.0,
                chi: zero_envelope(),
                gamma: Some(Box::new(move |x: &[f64]| {
                    rho * crate::util::norm(x).powf(p)
                })),
            },
            preset: Some("lp_deterministic"),
        })
    }

    /// Semilinear model with gradient weight equal to the (bounded) diffusion.
    pub fn briand_hu(params: &PresetParams) -> Result<ProblemSpec, ProblemError> {
        let p = params.exponent(1.5)?;
        let n = params.dim(1)?;
        let horizon = params.time_horizon(1.0)?;
        let amp = params.psi_amplitude.unwrap_or(0.5);
        let p_conj = p / (p - 1.0);

        let sigma_scalar = |x: &[f64], k: usize| 0.6 + 0.3 * x[k].cos();
        let diffusion: SpaceTimeMatrixFn = Box::new(move |x: &[f64], _t| {
            let mut m = Mat::zeros(n, n);
            for k in 0..n {
                m.set(k, k, sigma_scalar(x, k));
            }
            m
        });
        let weight: SpaceTimeMatrixFn = Box::new(move |x: &[f64], _t| {
            let mut m = Mat::zeros(n, n);
            for k in 0..n {
                m.set(k, k, sigma_scalar(x, k));
            }
            m
        });

        Ok(ProblemSpec {
            space_dim: n,
            p,
            p_conj,
            coefficients: Coefficients::Model {
                drift: Box::new(move |x: &[f64], _t| x.iter().map(|v| -0.4 * v).collect()),
                diffusion,
            },
            gradient_weight: weight,
            nonlinearity: Nonlinearity::PowerForm {
                weight: 0.5,
                exponent: p_conj,
                u_coeff: 0.2,
                source: None,
            },
            initial: Box::new(move |x: &[f64]| {
                amp * (1.0 + crate::util::dot(x, x)).powf(p / 2.0)
            }),
            horizon,
            constants: AssumptionConstants {
                c_b: 0.4,
                c_sigma: 0.9 * (n as f64).sqrt(),
                c_ell: 0.0,
                nu: 1.0,
                c_f: 0.5,
                c_s: 0.9 * (n as f64).sqrt(),
                c_hat: 0.2,
                chi: zero_envelope(),
                gamma: zero_envelope(),
            },
            preset: Some("briand_hu"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_contains_exactly_the_four_presets() {
        let reg = preset_registry();
        let names: Vec<&str> = reg.iter().map(|d| d.name).collect();
        assert_eq!(
            names,
            vec!["eq3_lq", "power_model", "lp_deterministic", "briand_hu"]
        );
    }

    #[test]
    fn registry_flags_divergence_and_blow_up_paths() {
        let reg = preset_registry();
        let lq = reg.iter().find(|d| d.name == "eq3_lq").unwrap();
        assert!(lq.hamiltonian_may_diverge);
        let lp = reg.iter().find(|d| d.name == "lp_deterministic").unwrap();
        assert!(lp.blow_up_applicable);
        assert!(lp.diffusion_identically_zero);
    }

    #[test]
    fn unknown_preset_is_rejected_with_the_valid_names() {
        let Err(err) = ProblemSpec::from_json(r#"{"preset": "nope"}"#) else {
            panic!("unknown preset must be rejected");
        };
        let msg = err.to_string();
        for name in PRESET_NAMES {
            assert!(msg.contains(name), "{msg} should list {name}");
        }
    }

    #[test]
    fn presets_build_from_json_with_overrides() {
        let spec =
            ProblemSpec::from_json(r#"{"preset": "lp_deterministic", "rho": 0.4, "p": 2.0}"#)
                .unwrap();
        assert_eq!(spec.space_dim, 1);
        assert_eq!(spec.preset, Some("lp_deterministic"));
        ProblemSpec::check_conjugate(spec.p, spec.p_conj).unwrap();
        // forcing term carries the rho coefficient
        let f = spec.nonlinearity.eval(&[2.0], 0.0, 0.0, &[0.0]);
        assert!((f - (-0.4 * 4.0)).abs() < 1e-12);
    }

    #[test]
    fn out_of_domain_overrides_are_rejected() {
        assert!(ProblemSpec::from_json(r#"{"preset": "power_model", "p": 1.0}"#).is_err());
        assert!(ProblemSpec::from_json(r#"{"preset": "eq3_lq", "p": 3.0}"#).is_err());
        assert!(ProblemSpec::from_json(r#"{"preset": "lp_deterministic", "rho": -1.0}"#).is_err());
        assert!(ProblemSpec::from_json(r#"{"preset": "power_model", "space_dim": 3}"#).is_err());
    }

    #[test]
    fn conjugate_identity_holds_for_all_presets() {
        for name in PRESET_NAMES {
            let spec = ProblemSpec::from_preset(name, &PresetParams::default()).unwrap();
            ProblemSpec::check_conjugate(spec.p, spec.p_conj).unwrap();
            assert!(spec.constants.all_finite());
            assert!(spec.constants.nu > 0.0);
        }
    }
}
