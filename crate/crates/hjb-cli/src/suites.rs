//! Suite execution in a fixed order with crash isolation and persistence.
//!
//! Each suite writes its artifacts into the output directory and returns a
//! record whose pass/fail verdict is derivable from the stored metrics
//! alone; a panicking suite is caught and recorded without stopping the
//! ones after it.

use crate::config::ExperimentConfig;
use anyhow::{Context, Result};
use hjb_core::barriers::{
    build_eps_subsolution, build_power_barriers, build_strict_supersolution,
    check_linearized_operator, confined_between, viscosity_residual_check, BarrierError,
    CheckRole,
};
use hjb_core::grid::{Grid, GridFunction};
use hjb_core::growth::{growth_witness, GrowthMode};
use hjb_core::oracles::auxiliary::AuxiliarySolution;
use hjb_core::oracles::manufactured::{ManufacturedKind, ManufacturedParams, ManufacturedSolution};
use hjb_core::oracles::riccati::{riccati_solve, RiccatiProblem};
use hjb_core::problem::{preset_registry, Coefficients, Nonlinearity};
use hjb_core::scheme::{cfl_dt, discrete_comparison_trial, solve, step_explicit, BoundaryCondition, SolveStatus};
use hjb_core::transforms::ChangeOfFunctions;
use hjb_core::util::Mat;
use hjb_core::validate::validate_assumptions;
use serde::Serialize;
use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Serialize)]
pub struct SuiteRecord {
    pub name: String,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    pub details: Vec<String>,
    pub artifacts: Vec<String>,
    pub wall_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub config: serde_json::Value,
    pub all_passed: bool,
    pub suites: Vec<SuiteRecord>,
}

impl RunRecord {
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }
}

struct SuiteOutput {
    passed: bool,
    metrics: BTreeMap<String, f64>,
    details: Vec<String>,
    artifacts: Vec<String>,
}

impl SuiteOutput {
    fn new() -> SuiteOutput {
        SuiteOutput {
            passed: true,
            metrics: BTreeMap::new(),
            details: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    fn fail(&mut self, detail: String) {
        self.passed = false;
        self.details.push(detail);
    }
}

/// Executes every selected suite in the fixed order, persists artifacts and
/// the summary document, and returns the record.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))?;

    let mut suites = Vec::new();
    for name in config.selected_suites() {
        suites.push(run_isolated(name, || run_suite(name, config)));
    }

    let record = RunRecord {
        config: serde_json::to_value(config)?,
        all_passed: suites.iter().all(|s| s.passed),
        suites,
    };
    std::fs::write(config.out_dir.join("summary.json"), record.summary_json())?;
    Ok(record)
}

/// Runs one suite body with crash isolation: errors and panics become a
/// failed record instead of aborting the run.
fn run_isolated(name: &str, body: impl FnOnce() -> Result<SuiteOutput>) -> SuiteRecord {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok(Ok(output)) => SuiteRecord {
            name: name.to_string(),
            passed: output.passed,
            metrics: output.metrics,
            details: output.details,
            artifacts: output.artifacts,
            wall_ms,
        },
        Ok(Err(err)) => SuiteRecord {
            name: name.to_string(),
            passed: false,
            metrics: BTreeMap::new(),
            details: vec![format!("error: {err}")],
            artifacts: Vec::new(),
            wall_ms,
        },
        Err(panic) => SuiteRecord {
            name: name.to_string(),
            passed: false,
            metrics: BTreeMap::new(),
            details: vec![format!("panicked: {}", panic_message(&panic))],
            artifacts: Vec::new(),
            wall_ms,
        },
    }
}

fn panic_message(panic: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = panic.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = panic.downcast_ref::<String>() {
        s.clone()
    } else {
        "opaque panic payload".to_string()
    }
}


fn run_suite(name: &str, config: &ExperimentConfig) -> Result<SuiteOutput> {
    match name {
        "validate" => suite_validate(config),
        "barriers" => suite_barriers(config),
        "oracles" => suite_oracles(config),
        "solve" => suite_solve(config),
        "comparison" => suite_comparison(config),
        "convergence" => suite_convergence(config),
        other => anyhow::bail!("unknown suite {other}"),
    }
}

fn applicable(config: &ExperimentConfig, suite: &str) -> bool {
    preset_registry()
        .iter()
        .find(|d| d.name == config.preset)
        .map(|d| d.suites.contains(&suite))
        .unwrap_or(false)
}

fn write_artifact(
    out: &mut SuiteOutput,
    dir: &Path,
    name: &str,
    contents: String,
) -> Result<()> {
    std::fs::write(dir.join(name), contents)?;
    out.artifacts.push(name.to_string());
    Ok(())
}

fn suite_validate(config: &ExperimentConfig) -> Result<SuiteOutput> {
    let spec = config.build_spec()?;
    let mut out = SuiteOutput::new();
    let report = validate_assumptions(&spec, 1000, 5.0, config.seed);
    out.metrics
        .insert("violations".into(), report.violations.len() as f64);
    if !report.passed() {
        out.fail(format!("{} violated inequalities", report.violations.len()));
    }
    write_artifact(
        &mut out,
        &config.out_dir,
        "validation.json",
        serde_json::to_string_pretty(&report)?,
    )?;
    Ok(out)
}

fn suite_barriers(config: &ExperimentConfig) -> Result<SuiteOutput> {
    let spec = config.build_spec()?;
    let mut out = SuiteOutput::new();
    let radius = 10.0f64.max(config.grid.extent);

    let (_, upper) = build_power_barriers(&spec).map_err(|e| anyhow::anyhow!("{e}"))?;
    let super_report =
        viscosity_residual_check(&upper, &spec, CheckRole::Super, 1e-6, 500, radius, config.seed)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
    out.metrics.insert(
        "upper_barrier_worst_violation".into(),
        super_report.worst_violation,
    );
    if !super_report.passed() {
        out.fail("upper power barrier residual check failed".into());
    }

    // clamp the envelope level into the feasible band when the coercivity
    // split bounds it (control-quadratic diffusion at p = 2)
    let (sub, eps_used) = match build_eps_subsolution(&spec, config.eps) {
        Ok(b) => (b, config.eps),
        Err(BarrierError::InfeasibleEps { max_eps, .. }) => {
            let eps = 0.9 * max_eps;
            out.details.push(format!(
                "eps clamped from {} to {eps} (coercivity bound)",
                config.eps
            ));
            (
                build_eps_subsolution(&spec, eps).map_err(|e| anyhow::anyhow!("{e}"))?,
                eps,
            )
        }
        Err(e) => return Err(anyhow::anyhow!("{e}")),
    };
    out.metrics.insert("eps_used".into(), eps_used);
    out.metrics.insert("eps_tau_valid".into(), sub.tau_valid);
    let sub_report =
        viscosity_residual_check(&sub, &spec, CheckRole::Sub, 1e-6, 500, radius, config.seed + 1)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
    out.metrics.insert(
        "envelope_subsolution_worst_violation".into(),
        sub_report.worst_violation,
    );
    if sub_report.worst_violation > 0.0 {
        out.fail("envelope subsolution residual check failed".into());
    }

    let mut reports = vec![
        ("upper_power_barrier", super_report),
        ("envelope_subsolution", sub_report),
    ];

    if spec.is_controlled() {
        out.details
            .push("linearized-operator check skipped (controlled form)".into());
    } else {
        let psi_constant = {
            let points: Vec<Vec<f64>> = (0..=512)
                .map(|i| vec![-32.0 + 64.0 * i as f64 / 512.0])
                .collect();
            let values: Vec<f64> = points.iter().map(|x| (spec.initial)(x)).collect();
            growth_witness(&points, &values, spec.p, GrowthMode::Bounded)
                .map(|w| w.bound_constant)
                .unwrap_or(1.0)
        };
        let cf = ChangeOfFunctions {
            l_rate: 1.0,
            cbar: ChangeOfFunctions::fix_cbar(&[psi_constant]),
            p: spec.p,
        };
        let sup = build_strict_supersolution(&cf, &spec, 50.0, 0.5)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let lin = check_linearized_operator(&sup, &spec, 500, radius, config.seed + 2)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        out.metrics
            .insert("linearized_operator_min".into(), lin.min_residual);
        if lin.min_residual <= 0.0 {
            out.fail("linearized operator not strictly positive".into());
        }
        reports.push(("linearized_operator", lin));
    }

    let combined: BTreeMap<&str, serde_json::Value> = reports
        .iter()
        .map(|(k, r)| (*k, serde_json::to_value(r).unwrap()))
        .collect();
    write_artifact(
        &mut out,
        &config.out_dir,
        "barriers.json",
        serde_json::to_string_pretty(&combined)?,
    )?;
    Ok(out)
}

fn suite_oracles(config: &ExperimentConfig) -> Result<SuiteOutput> {
    let spec = config.build_spec()?;
    let mut out = SuiteOutput::new();
    let blow_up = preset_registry()
        .iter()
        .find(|d| d.name == config.preset)
        .map(|d| d.blow_up_applicable)
        .unwrap_or(false);

    if blow_up {
        let rho = config.overrides.rho.unwrap_or(0.0);
        let prob = RiccatiProblem::new(spec.p, rho, spec.horizon)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let report = riccati_solve(&prob, 1e-3).map_err(|e| anyhow::anyhow!("{e}"))?;
        if let Some(tau) = report.tau {
            out.metrics.insert("tau".into(), tau);
            match report.tau_from_quadrature {
                Some(tq) => {
                    out.metrics.insert("tau_quadrature".into(), tq);
                    out.metrics.insert("tau_gap".into(), (tau - tq).abs());
                    if (tau - tq).abs() > 1e-4 {
                        out.fail(format!(
                            "integrated and quadrature blow-up times disagree: {tau} vs {tq}"
                        ));
                    }
                }
                None => out.fail("blow-up detected but the quadrature diverges".into()),
            }
        } else {
            out.details.push(
                "no blow-up within the horizon (above the quadrature threshold or \
                 past the dichotomy boundary)"
                    .into(),
            );
            if let Some(threshold) = report.quadrature_threshold {
                out.metrics.insert("horizon_threshold".into(), threshold);
                if spec.horizon > threshold {
                    out.fail(format!(
                        "horizon {} exceeds the threshold {threshold} but no blow-up \
                         was detected",
                        spec.horizon
                    ));
                }
            }
        }
        write_artifact(
            &mut out,
            &config.out_dir,
            "blowup.json",
            serde_json::to_string_pretty(&report)?,
        )?;
        write_artifact(
            &mut out,
            &config.out_dir,
            "trajectory.csv",
            report.trajectory_csv(),
        )?;
    } else {
        // compact auxiliary-problem property check plus a plot curve
        let mut csv = String::from("r,t,phi\n");
        for cap in [1.0, 100.0] {
            let sol = AuxiliarySolution::new(cap, 512).map_err(|e| anyhow::anyhow!("{e}"))?;
            for t in [0.1, 0.5] {
                for i in 0..100 {
                    let r = 3.0 * cap * i as f64 / 99.0;
                    let jet = sol.jet(r, t).map_err(|e| anyhow::anyhow!("{e}"))?;
                    if jet.value < (r - cap).max(0.0) - 1e-9 * (1.0 + cap)
                        || jet.d_r < -1e-8
                        || jet.d_r > 1.0f64.exp() + 1e-8
                    {
                        out.fail(format!("auxiliary property violated at R={cap} r={r} t={t}"));
                    }
                    if cap == 1.0 {
                        csv.push_str(&format!("{r},{t},{}\n", jet.value));
                    }
                }
            }
        }
        write_artifact(&mut out, &config.out_dir, "auxiliary.csv", csv)?;
    }
    Ok(out)
}

fn suite_solve(config: &ExperimentConfig) -> Result<SuiteOutput> {
    let spec = config.build_spec()?;
    let mut out = SuiteOutput::new();
    if !applicable(config, "solve") && !spec.is_controlled() {
        out.details.push("solve marked not applicable for this preset".into());
    }

    if spec.is_controlled() {
        let horizon = spec.horizon.min(0.05);
        let grid = Grid::new(
            vec![config.grid.extent; spec.space_dim],
            vec![config.grid.nodes.min(41); spec.space_dim],
            horizon,
        )
        .map_err(|e| anyhow::anyhow!("{e}"))?;
        let init = GridFunction::from_fn(grid, 0.0, |x| (spec.initial)(x));
        write_artifact(&mut out, &config.out_dir, "solution_initial.csv", init.to_csv())?;
        let outcome = solve(&spec, init, &BoundaryCondition::Frozen)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        out.metrics.insert("steps".into(), outcome.steps as f64);
        if outcome.status != SolveStatus::Completed {
            out.fail(format!("short controlled solve ended with {:?}", outcome.status));
        }
        write_artifact(
            &mut out,
            &config.out_dir,
            "solution_final.csv",
            outcome.final_state.to_csv(),
        )?;
        write_artifact(
            &mut out,
            &config.out_dir,
            "solve_summary.json",
            outcome.summary_json(),
        )?;
        return Ok(out);
    }

    let blow_up = preset_registry()
        .iter()
        .find(|d| d.name == config.preset)
        .map(|d| d.blow_up_applicable)
        .unwrap_or(false);

    if blow_up {
        let grid = Grid::new(
            vec![config.grid.extent],
            vec![config.grid.nodes],
            spec.horizon,
        )
        .map_err(|e| anyhow::anyhow!("{e}"))?;
        let init = GridFunction::from_fn(grid, 0.0, |x| (spec.initial)(x));
        write_artifact(&mut out, &config.out_dir, "solution_initial.csv", init.to_csv())?;
        let outcome = solve(&spec, init, &BoundaryCondition::Extrapolate)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        out.metrics.insert("steps".into(), outcome.steps as f64);
        match outcome.status {
            SolveStatus::BlewUp { tau_num } => {
                out.metrics.insert("tau_num".into(), tau_num);
            }
            _ => out.details.push(
                "truncated run stays bounded: the x-independent convex Hamiltonian \
                 obeys a gradient maximum principle on the truncated domain, so the \
                 far-field escape is not representable (see the blow-up study notes)"
                    .into(),
            ),
        }
        write_artifact(
            &mut out,
            &config.out_dir,
            "solution_final.csv",
            outcome.final_state.to_csv(),
        )?;
        write_artifact(
            &mut out,
            &config.out_dir,
            "solve_summary.json",
            outcome.summary_json(),
        )?;
        return Ok(out);
    }

    // diffusive model presets: barrier boundary data, nodewise confinement
    let (lower, upper) = build_power_barriers(&spec).map_err(|e| anyhow::anyhow!("{e}"))?;
    let horizon = spec.horizon.min(lower.tau_valid);
    let grid = Grid::new(
        vec![config.grid.extent; spec.space_dim],
        vec![config.grid.nodes; spec.space_dim],
        horizon,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    let init = GridFunction::from_fn(grid.clone(), 0.0, |x| (spec.initial)(x));
    write_artifact(&mut out, &config.out_dir, "solution_initial.csv", init.to_csv())?;

    let boundary = upper.boundary_condition();
    let mut state = init;
    let mut steps = 0usize;
    let mut confined = true;
    while horizon - state.time > 1e-12 * horizon {
        let dt = cfl_dt(&spec, &state)
            .map_err(|e| anyhow::anyhow!("{e}"))?
            .min(horizon - state.time);
        state = step_explicit(&spec, &state, dt, &boundary).map_err(|e| anyhow::anyhow!("{e}"))?;
        steps += 1;
        if !confined_between(&state, &lower, &upper) {
            confined = false;
        }
    }
    out.metrics.insert("steps".into(), steps as f64);
    out.metrics
        .insert("confined".into(), if confined { 1.0 } else { 0.0 });
    if !confined {
        out.fail("numerical solution escaped the barrier envelope".into());
    }

    // envelope table for plotting: x, numerical value, both barriers
    let mut envelope = String::from("x,u_num,barrier_sub,barrier_super\n");
    if spec.space_dim == 1 {
        for i in 0..state.grid.node_count() {
            let x = state.grid.point(i);
            envelope.push_str(&format!(
                "{},{},{},{}\n",
                x[0],
                state.values[i],
                lower.value(&x, state.time),
                upper.value(&x, state.time)
            ));
        }
    }
    write_artifact(&mut out, &config.out_dir, "envelope.csv", envelope)?;
    write_artifact(&mut out, &config.out_dir, "solution_final.csv", state.to_csv())?;
    Ok(out)
}

fn suite_comparison(config: &ExperimentConfig) -> Result<SuiteOutput> {
    let spec = config.build_spec()?;
    let mut out = SuiteOutput::new();
    if spec.is_controlled() {
        out.details
            .push("skipped: comparison trials run on the model form".into());
        return Ok(out);
    }
    let grid = Grid::new(
        vec![config.grid.extent],
        vec![config.grid.nodes],
        spec.horizon,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;

    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    let mut worst = 0.0f64;
    for _ in 0..config.comparison_pairs {
        let amp: f64 = rng.gen_range(0.2..1.0);
        let freq: f64 = rng.gen_range(0.5..3.0);
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let gap: f64 = rng.gen_range(0.05..0.8);
        let v0 = GridFunction::from_fn(grid.clone(), 0.0, |x| amp * (freq * x[0] + phase).sin());
        let u0 = GridFunction::from_fn(grid.clone(), 0.0, |x| {
            amp * (freq * x[0] + phase).sin() - gap * (1.1 + (x[0] * 1.7).cos()) / 2.1
        });
        let report = discrete_comparison_trial(&spec, u0, v0, config.comparison_steps)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        worst = worst.max(report.max_violation);
    }
    out.metrics.insert("max_violation".into(), worst);
    out.metrics
        .insert("pairs".into(), config.comparison_pairs as f64);
    out.metrics
        .insert("steps".into(), config.comparison_steps as f64);
    if worst > 1e-10 {
        out.fail(format!("ordering violation {worst:e} above 1e-10"));
    }
    let metrics_doc = serde_json::to_string_pretty(&out.metrics)?;
    write_artifact(&mut out, &config.out_dir, "comparison.json", metrics_doc)?;
    Ok(out)
}

fn suite_convergence(config: &ExperimentConfig) -> Result<SuiteOutput> {
    let mut out = SuiteOutput::new();
    let drift = 0.6;
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
    let mut spec = config.build_spec()?;
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

    let t_final = 0.05;
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for nodes in [51usize, 101, 201] {
        let grid = Grid::new(vec![1.0], vec![nodes], t_final)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let h = grid.mesh(0);
        let init_sol = sol.clone();
        let init = GridFunction::from_fn(grid.clone(), 0.0, |x| init_sol.value(x, 0.0));
        let bc_sol = sol.clone();
        let bc = BoundaryCondition::Dirichlet(Box::new(move |x, t| bc_sol.value(x, t)));
        let outcome = solve(&spec, init, &bc).map_err(|e| anyhow::anyhow!("{e}"))?;
        let mut err = 0.0f64;
        for i in 0..grid.node_count() {
            let x = grid.point(i);
            err = err
                .max((outcome.final_state.values[i] - sol.value(&x, outcome.final_state.time)).abs());
        }
        rows.push((h, err));
    }

    let mut csv = String::from("h,error,observed_order\n");
    let mut ratios = Vec::new();
    for (i, (h, err)) in rows.iter().enumerate() {
        if i == 0 {
            csv.push_str(&format!("{h},{err},\n"));
        } else {
            let order = (rows[i - 1].1 / err).log2();
            ratios.push(rows[i - 1].1 / err);
            csv.push_str(&format!("{h},{err},{order}\n"));
        }
    }
    out.metrics.insert("finest_error".into(), rows[2].1);
    out.metrics.insert("ratio_1".into(), ratios[0]);
    out.metrics.insert("ratio_2".into(), ratios[1]);
    if ratios.iter().any(|r| *r < 1.7) {
        out.fail(format!("halving ratios {ratios:?} below 1.7"));
    }
    write_artifact(&mut out, &config.out_dir, "convergence.csv", csv)?;
    Ok(out)
}
