//! Monte-Carlo point checks of the structural hypotheses: coercivity of the
//! running cost, bounds on the gradient weight, convexity and growth of the
//! nonlinearity, and its Lipschitz dependence on the solution variable.

use crate::problem::{Coefficients, ProblemSpec};
use crate::util::norm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONVEXITY_TOL: f64 = 1e-10;

/// One violated inequality with the witnessing sample.
#[derive(Clone, Debug, serde::Serialize)]
pub struct Violation {
    pub check: &'static str,
    pub witness: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Default, serde::Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples `sample_count` random points in the ball of `domain_radius`
/// (controls included where applicable) and records every violated
/// inequality. Violations are reported, never thrown.
pub fn validate_assumptions(
    spec: &ProblemSpec,
    sample_count: usize,
    domain_radius: f64,
    seed: u64,
) -> ValidationReport {
    assert!(sample_count >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ValidationReport {
        samples: sample_count,
        violations: Vec::new(),
    };
    let n = spec.space_dim;
    let c = &spec.constants;

    for _ in 0..sample_count {
        let x: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(-domain_radius..domain_radius))
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(-domain_radius..domain_radius))
            .collect();
        let t = rng.gen_range(0.0..spec.horizon);
        let u: f64 = rng.gen_range(-5.0..5.0);
        let v: f64 = rng.gen_range(-5.0..5.0);
        let z1: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let z2: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();

        // coercivity of the running cost (controlled problems)
        if let Coefficients::Controlled {
            running_cost,
            control_dim,
            ..
        } = &spec.coefficients
        {
            let alpha: Vec<f64> = (0..*control_dim)
                .map(|_| rng.gen_range(-domain_radius..domain_radius))
                .collect();
            let lhs = running_cost(&x, t, &alpha);
            let rhs =
                c.nu * norm(&alpha).powf(spec.p) - c.c_ell * (1.0 + norm(&x).powf(spec.p));
            if lhs < rhs - 1e-12 {
                report.violations.push(Violation {
                    check: "running_cost_coercivity",
                    witness: [x.clone(), vec![t], alpha].concat(),
                    lhs,
                    rhs,
                });
            }
        }

        // gradient weight: bound and Lipschitz quotient
        let sx = (spec.gradient_weight)(&x, t);
        let sy = (spec.gradient_weight)(&y, t);
        if sx.frobenius_norm() > c.c_s + 1e-12 {
            report.violations.push(Violation {
                check: "gradient_weight_bound",
                witness: [x.clone(), vec![t]].concat(),
                lhs: sx.frobenius_norm(),
                rhs: c.c_s,
            });
        }
        let dxy = norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
        if dxy > 1e-9 {
            let diff = {
                let mut d = sx.clone();
                for (dv, sv) in d.data.iter_mut().zip(&sy.data) {
                    *dv -= sv;
                }
                d.frobenius_norm()
            };
            if diff / dxy > c.c_s + 1e-9 {
                report.violations.push(Violation {
                    check: "gradient_weight_lipschitz",
                    witness: [x.clone(), y.clone(), vec![t]].concat(),
                    lhs: diff / dxy,
                    rhs: c.c_s,
                });
            }
        }

        // midpoint convexity of z ↦ f(x,t,u,z)
        let zm: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| 0.5 * (a + b)).collect();
        let f1 = spec.nonlinearity.eval(&x, t, u, &z1);
        let f2 = spec.nonlinearity.eval(&x, t, u, &z2);
        let fm = spec.nonlinearity.eval(&x, t, u, &zm);
        if fm > 0.5 * (f1 + f2) + CONVEXITY_TOL {
            report.violations.push(Violation {
                check: "nonlinearity_midpoint_convexity",
                witness: [x.clone(), vec![t, u], z1.clone(), z2.clone()].concat(),
                lhs: fm,
                rhs: 0.5 * (f1 + f2),
            });
        }

        // growth bound |f| ≤ C_f (1 + |x|^p + |u| + |z|^{p'})
        let growth =
            c.c_f * (1.0 + norm(&x).powf(spec.p) + u.abs() + norm(&z1).powf(spec.p_conj));
        if f1.abs() > growth + 1e-12 {
            report.violations.push(Violation {
                check: "nonlinearity_growth",
                witness: [x.clone(), vec![t, u], z1.clone()].concat(),
                lhs: f1.abs(),
                rhs: growth,
            });
        }

        // Lipschitz dependence on the solution variable
        let fu = spec.nonlinearity.eval(&x, t, u, &z1);
        let fv = spec.nonlinearity.eval(&x, t, v, &z1);
        if (fu - fv).abs() > c.c_hat * (u - v).abs() + 1e-12 {
            report.violations.push(Violation {
                check: "nonlinearity_u_lipschitz",
                witness: [x.clone(), vec![t, u, v], z1.clone()].concat(),
                lhs: (fu - fv).abs(),
                rhs: c.c_hat * (u - v).abs(),
            });
        }
    }

    report
}
