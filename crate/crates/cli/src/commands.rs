//! The five subcommands. Each returns its statistics as JSON plus any CSV
//! series; the caller owns all file I/O.

use qthreshold_core::dense::DENSE_QUBIT_CAP;
use qthreshold_core::integrators::{
    evolve_mean_state_oracle, evolve_noiseless_reference, evolve_noiseless_splitting, step_grid,
};
use qthreshold_core::montecarlo::{rescaled_mean_amplitude, Ensemble, EnsembleStatistics, TrajectoryRecord};
use qthreshold_core::noise::{gamma_integral, gamma_quadrature, verify_local_condition_pauli, LOCAL_CONDITION_TOLERANCE};
use qthreshold_core::rng::derive_seed_path;
use qthreshold_core::threshold::{
    hoeffding_empirical_check, plan_parameters, sweep_noise_strength, verify_theorem, SweepSettings,
};
use qthreshold_core::{PauliString, StateVector};
use serde_json::{json, Value};

use crate::config::{build_model, ExperimentConfig, Model, Target, Violation};
use crate::error::CliError;
use crate::output::csv;

/// Standard errors allowed between the `dt` and `dt/2` rescaled means.
pub const CONVERGENCE_SE: f64 = 3.0;
/// Largest infidelity allowed between the `dt` and `dt/2` noiseless states.
pub const CONVERGENCE_INFIDELITY: f64 = 1e-6;
/// Quadrature steps used to cross-check the exact Γ.
const GAMMA_QUADRATURE_STEPS: usize = 4096;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Noiseless,
    Ensemble,
    VerifyTheorem,
    Sweep,
    OracleCheck,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Noiseless => "noiseless",
            CommandKind::Ensemble => "ensemble",
            CommandKind::VerifyTheorem => "verify-theorem",
            CommandKind::Sweep => "sweep",
            CommandKind::OracleCheck => "oracle-check",
        }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub dt_halve: bool,
    pub dump_trajectories: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommandOutput {
    pub statistics: Value,
    /// `(file name, contents)` of CSV series.
    pub files: Vec<(String, String)>,
    /// False when a built-in check failed (exit code 3).
    pub passed: bool,
}

pub fn execute(kind: CommandKind, cfg: &ExperimentConfig, opts: RunOptions) -> Result<CommandOutput, CliError> {
    let model = build_model(cfg).map_err(CliError::Validation)?;
    if opts.dt_halve && matches!(kind, CommandKind::VerifyTheorem | CommandKind::Sweep) {
        return Err(invalid("--dt-halve", format!("not supported by {}", kind.name())));
    }
    match kind {
        CommandKind::Noiseless => noiseless(cfg, &model, opts),
        CommandKind::Ensemble => ensemble(cfg, &model, opts),
        CommandKind::VerifyTheorem => theorem(cfg, &model),
        CommandKind::Sweep => sweep(cfg, &model),
        CommandKind::OracleCheck => oracle_check(cfg, &model, opts),
    }
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Validation(vec![Violation::new(field, message)])
}

fn runtime(e: qthreshold_core::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn reference(model: &Model, dt: f64) -> Result<(StateVector, &'static str), CliError> {
    if model.hamiltonian.n_qubits() <= DENSE_QUBIT_CAP {
        Ok((evolve_noiseless_reference(&model.hamiltonian, &model.initial_state, dt).map_err(runtime)?, "dense-midpoint"))
    } else {
        Ok((evolve_noiseless_splitting(&model.hamiltonian, &model.initial_state, dt).map_err(runtime)?, "splitting"))
    }
}

fn resolve_target(cfg: &ExperimentConfig, psi: &StateVector) -> usize {
    match cfg.run.target {
        Target::Index(m) => m,
        Target::Auto(_) => {
            let p = psi.probabilities();
            let mut best = 0;
            for (i, &x) in p.iter().enumerate() {
                if x > p[best] {
                    best = i;
                }
            }
            best
        }
    }
}

fn complex(z: num_complex::Complex64) -> Value {
    json!([z.re, z.im])
}

fn noiseless(cfg: &ExperimentConfig, model: &Model, opts: RunOptions) -> Result<CommandOutput, CliError> {
    let (psi, solver) = reference(model, model.dt)?;
    let target = resolve_target(cfg, &psi);
    let (n_steps, dt) = step_grid(model.total_time, model.dt).map_err(runtime)?;
    let cm = psi.amplitudes()[target];
    let mut stats = json!({
        "solver": solver,
        "dt": dt,
        "n_steps": n_steps,
        "target": target,
        "target_amplitude": complex(cm),
        "epsilon": 1.0 - cm.norm(),
        "norm": psi.norm(),
        "amplitudes": psi.amplitudes().iter().map(|z| complex(*z)).collect::<Vec<_>>(),
        "probabilities": psi.probabilities(),
    });
    let mut passed = true;
    if opts.dt_halve {
        let (half, _) = reference(model, 0.5 * dt)?;
        let infidelity = 1.0 - psi.fidelity(&half).map_err(runtime)?;
        let ok = infidelity < CONVERGENCE_INFIDELITY;
        passed &= ok;
        stats["convergence"] = json!({
            "dt_halved": 0.5 * dt,
            "max_abs_diff": psi.max_abs_diff(&half).map_err(runtime)?,
            "infidelity": infidelity,
            "tolerance": CONVERGENCE_INFIDELITY,
            "passed": ok,
        });
    }
    let rows = psi.amplitudes().iter().enumerate().map(|(i, z)| {
        vec![i.to_string(), z.re.to_string(), z.im.to_string(), z.norm_sqr().to_string()]
    });
    let files = vec![("amplitudes.csv".to_string(), csv(&["index", "re", "im", "probability"], rows))];
    Ok(CommandOutput { statistics: stats, files, passed })
}

fn make_ensemble(cfg: &ExperimentConfig, model: &Model, dt: f64) -> Result<Ensemble, CliError> {
    let tc = model.trajectory_config(&cfg.run, dt).map_err(runtime)?;
    let (psi, _) = reference(model, tc.dt())?;
    let target = resolve_target(cfg, &psi);
    let mut e = Ensemble::new(tc, target).map_err(runtime)?;
    if let Some(o) = &cfg.run.observable {
        let p: PauliString = o.parse().map_err(|e: qthreshold_core::Error| invalid("run.observable", e.to_string()))?;
        e = e.with_observable(p).map_err(runtime)?;
    }
    Ok(e)
}

fn ensemble_json(cfg: &ExperimentConfig, e: &Ensemble, s: &EnsembleStatistics) -> Value {
    let (re, im) = (s.real_part(), s.imag_part());
    let rm = rescaled_mean_amplitude(s);
    let nd = s.norm_deviation();
    let counts: serde_json::Map<String, Value> =
        s.outcome_counts.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    let observable = cfg.run.observable.as_ref().map(|p| {
        let o = s.observable();
        json!({ "pauli": p, "mean": o.mean, "se": o.se })
    });
    json!({
        "r": s.r,
        "gamma": s.gamma,
        "mean_re": re.mean,
        "mean_im": im.mean,
        "se_re": re.se,
        "se_im": im.se,
        "outcome_counts": counts,
        "target": s.target_index,
        "target_count": s.target_count(),
        "target_found": s.target_found(),
        "reference_amplitude": complex(e.reference_amplitude()),
        "epsilon": e.epsilon(),
        "phase_factor": complex(s.phase_factor),
        "rescaled_re": rm.value.re,
        "rescaled_im": rm.value.im,
        "rescaled_se_re": rm.se_re,
        "rescaled_se_im": rm.se_im,
        "empirical_weight": s.empirical_weight(),
        "norm_deviation_mean": nd.mean,
        "norm_deviation_se": nd.se,
        "norm_deviation_max": s.max_norm_deviation(),
        "observable": observable,
        "scheme": e.config().scheme().to_string(),
        "renormalize": e.config().renormalize_each_step(),
        "dt": e.config().dt(),
        "n_steps": e.config().n_steps(),
    })
}

fn trajectory_csv(records: &[TrajectoryRecord]) -> String {
    let rows = records.iter().map(|r| {
        vec![
            r.trajectory_index.to_string(),
            r.measurement_outcome.to_string(),
            r.target_amplitude.re.to_string(),
            r.target_amplitude.im.to_string(),
            r.final_norm.to_string(),
            r.observable.map(|o| o.to_string()).unwrap_or_default(),
        ]
    });
    csv(&["trajectory_index", "measurement_outcome", "target_re", "target_im", "final_norm", "observable"], rows)
}

fn ensemble(cfg: &ExperimentConfig, model: &Model, opts: RunOptions) -> Result<CommandOutput, CliError> {
    let r = cfg.run.r.ok_or_else(|| invalid("run.r", "required by ensemble"))?;
    let seed = cfg.run.root_seed;
    let e = make_ensemble(cfg, model, model.dt)?;
    let mut files = Vec::new();
    let stats = if opts.dump_trajectories || cfg.output.dump_trajectories {
        let (stats, records) = e.run_with_records(0..r, seed).map_err(runtime)?;
        files.push(("trajectories.csv".to_string(), trajectory_csv(&records)));
        stats
    } else {
        e.run(r, seed).map_err(runtime)?
    };
    let mut out = ensemble_json(cfg, &e, &stats);
    let mut passed = true;
    if opts.dt_halve {
        let half = make_ensemble(cfg, model, 0.5 * e.config().dt())?;
        let hs = half.run(r, seed).map_err(runtime)?;
        let (a, b) = (rescaled_mean_amplitude(&stats), rescaled_mean_amplitude(&hs));
        let (gap_re, gap_im) = (a.value.re - b.value.re, a.value.im - b.value.im);
        let se_re = a.se_re.hypot(b.se_re);
        let se_im = a.se_im.hypot(b.se_im);
        let ok = gap_re.abs() <= CONVERGENCE_SE * se_re && gap_im.abs() <= CONVERGENCE_SE * se_im;
        passed &= ok;
        out["dt_halved"] = ensemble_json(cfg, &half, &hs);
        out["convergence"] = json!({
            "gap_re": gap_re,
            "gap_im": gap_im,
            "combined_se_re": se_re,
            "combined_se_im": se_im,
            "tolerance_se": CONVERGENCE_SE,
            "passed": ok,
        });
    }
    Ok(CommandOutput { statistics: out, files, passed })
}

fn theorem(cfg: &ExperimentConfig, model: &Model) -> Result<CommandOutput, CliError> {
    let run = &cfg.run;
    let base = make_ensemble(cfg, model, model.dt)?;
    let epsilon = base.epsilon();
    let default_plan = run.hoeffding.is_none().then(|| serde_json::from_value(json!({})).expect("defaults"));
    let plan_cfg: Option<crate::config::PlanConfig> = run.plan.clone().or(default_plan);
    let mut passed = true;
    let mut theorems = Vec::new();
    let mut rows = Vec::new();
    if let Some(p) = &plan_cfg {
        let gammas = p.gammas.clone().unwrap_or_else(|| vec![base.gamma()]);
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(invalid("run.target", format!("noiseless ε = {epsilon} must lie in (0, 1) to plan")));
        }
        for (i, &gamma) in gammas.iter().enumerate() {
            let ensemble = if p.gammas.is_some() {
                if base.gamma() <= 0.0 {
                    return Err(invalid("run.plan.gammas", "rescaling to a target Γ needs noise with Γ > 0"));
                }
                let scale = (gamma / base.gamma()).sqrt();
                let noise = model.with_scaled_strength(scale).map_err(runtime)?;
                let tc = base.config().with_noise(noise).map_err(runtime)?;
                Ensemble::new(tc, base.target_index()).map_err(runtime)?
            } else {
                base.clone()
            };
            let mut plan = plan_parameters(epsilon, ensemble.gamma(), p.c).map_err(runtime)?;
            if let Some(r) = p.r_override {
                plan = plan.with_r(r);
            }
            let report =
                verify_theorem(&ensemble, &plan, p.trials, derive_seed_path(run.root_seed, &[i as u64])).map_err(runtime)?;
            let hypotheses = report.plan_satisfies_inequality && report.plan_satisfies_sample_bounds;
            let meets = report.empirical_success >= p.p_star;
            // only plans meeting the hypotheses carry a prediction
            passed &= !hypotheses || meets;
            for t in &report.series {
                rows.push(vec![
                    i.to_string(),
                    ensemble.gamma().to_string(),
                    t.trial.to_string(),
                    t.found.to_string(),
                    t.target_count.to_string(),
                    t.rescaled_re.to_string(),
                    t.rescaled_im.to_string(),
                    t.empirical_weight.to_string(),
                    t.constraint_violated.to_string(),
                ]);
            }
            theorems.push(json!({
                "gamma": ensemble.gamma(),
                "requested_gamma": gamma,
                "plan": report.plan,
                "plan_satisfies_inequality": report.plan_satisfies_inequality,
                "plan_satisfies_sample_bounds": report.plan_satisfies_sample_bounds,
                "trials": report.trials,
                "hit_count": report.hit_count,
                "empirical_success": report.empirical_success,
                "hoeffding_violations": report.hoeffding_violations,
                "p_star": p.p_star,
                "meets_p_star": meets,
            }));
        }
    }
    let hoeffding = match &run.hoeffding {
        Some(h) => {
            let check = hoeffding_empirical_check(&base, h.r, h.delta, h.trials, run.root_seed).map_err(runtime)?;
            passed &= check.passed;
            Some(check)
        }
        None => None,
    };
    let stats = json!({
        "target": base.target_index(),
        "epsilon": epsilon,
        "gamma": base.gamma(),
        "theorems": theorems,
        "hoeffding": hoeffding,
        "passed": passed,
    });
    let mut files = Vec::new();
    if !rows.is_empty() {
        let header = [
            "gamma_index",
            "gamma",
            "trial",
            "found",
            "target_count",
            "rescaled_re",
            "rescaled_im",
            "empirical_weight",
            "constraint_violated",
        ];
        files.push(("theorem_trials.csv".to_string(), csv(&header, rows)));
    }
    Ok(CommandOutput { statistics: stats, files, passed })
}

fn sweep(cfg: &ExperimentConfig, model: &Model) -> Result<CommandOutput, CliError> {
    let s = cfg.run.sweep.as_ref().ok_or_else(|| invalid("run.sweep", "required by sweep"))?;
    let k = model.noise.len();
    if k == 0 {
        return Err(invalid("noise", "sweep needs at least one noise channel"));
    }
    let grid: Vec<f64> = match (&s.g_grid, &s.gamma_grid) {
        (Some(g), _) => g.clone(),
        (None, Some(gammas)) => gammas.iter().map(|g| (2.0 * g / (k as f64 * model.total_time)).sqrt()).collect(),
        (None, None) => unreachable!("validated"),
    };
    let base = model.trajectory_config(&cfg.run, model.dt).map_err(runtime)?;
    let (psi, _) = reference(model, base.dt())?;
    let target = resolve_target(cfg, &psi);
    let family = |g: f64| {
        let noise = model.with_constant_strength(g)?;
        Ensemble::new(base.with_noise(noise)?, target)
    };
    let settings = SweepSettings { success_target: s.p_star, repeats: s.repeats, r_cap: s.r_cap };
    let rows = sweep_noise_strength(family, &grid, &settings, cfg.run.root_seed).map_err(runtime)?;
    let non_decreasing = rows.windows(2).all(|w| w[1].censored || w[0].min_r <= w[1].min_r);
    let body = rows.iter().map(|r| {
        vec![r.g.to_string(), r.gamma.to_string(), r.min_r.to_string(), r.censored.to_string(), r.repeats.to_string()]
    });
    let files = vec![("sweep.csv".to_string(), csv(&["g", "gamma", "min_r", "censored", "repeats"], body))];
    let stats = json!({
        "target": target,
        "epsilon": 1.0 - psi.amplitudes()[target].norm(),
        "p_star": s.p_star,
        "r_cap": s.r_cap,
        "rows": rows,
        "non_decreasing": non_decreasing,
    });
    Ok(CommandOutput { statistics: stats, files, passed: true })
}

fn oracle_check(cfg: &ExperimentConfig, model: &Model, opts: RunOptions) -> Result<CommandOutput, CliError> {
    let n = model.hamiltonian.n_qubits();
    if n > DENSE_QUBIT_CAP {
        return Err(invalid("model.n_qubits", format!("oracle-check is limited to {DENSE_QUBIT_CAP} qubits")));
    }
    let tolerance = cfg.run.oracle_tolerance.unwrap_or(crate::config::DEFAULT_ORACLE_TOLERANCE);
    let check = |dt: f64| -> Result<Value, CliError> {
        let psi = evolve_noiseless_reference(&model.hamiltonian, &model.initial_state, dt).map_err(runtime)?;
        let mean =
            evolve_mean_state_oracle(&model.hamiltonian, &model.noise, &model.initial_state, dt).map_err(runtime)?;
        let gamma = gamma_integral(&model.noise, model.total_time).map_err(runtime)?;
        let f = gamma.exp();
        let max_abs_diff = mean
            .amplitudes()
            .iter()
            .zip(psi.amplitudes())
            .map(|(m, p)| (m * f - p).norm())
            .fold(0.0, f64::max);
        Ok(json!({
            "dt": step_grid(model.total_time, dt).map_err(runtime)?.1,
            "gamma": gamma,
            "max_abs_diff": max_abs_diff,
            "mean_state_norm": mean.norm(),
            "passed": max_abs_diff < tolerance,
        }))
    };
    let primary = check(model.dt)?;
    let gamma = primary["gamma"].as_f64().unwrap_or(f64::NAN);
    let quad = gamma_quadrature(&model.noise, model.total_time, GAMMA_QUADRATURE_STEPS).map_err(runtime)?;
    let mut local = Vec::new();
    let mut local_ok = true;
    for ch in model.noise.channels() {
        let c = verify_local_condition_pauli(ch.operator(), LOCAL_CONDITION_TOLERANCE).map_err(runtime)?;
        local_ok &= c.passed;
        local.push(json!({
            "pauli": ch.operator().to_string(),
            "passed": c.passed,
            "scalar": c.scalar,
            "residual": c.residual,
        }));
    }
    let mut passed = primary["passed"] == json!(true) && local_ok;
    let mut stats = json!({
        "tolerance": tolerance,
        "gamma": gamma,
        "gamma_quadrature": quad,
        "max_abs_diff": primary["max_abs_diff"],
        "mean_state_norm": primary["mean_state_norm"],
        "dt": primary["dt"],
        "local_condition": local,
        "passed": passed,
    });
    if opts.dt_halve {
        let half = check(0.5 * primary["dt"].as_f64().unwrap_or(model.dt))?;
        passed &= half["passed"] == json!(true);
        stats["dt_halved"] = half;
        stats["passed"] = json!(passed);
    }
    Ok(CommandOutput { statistics: stats, files: Vec::new(), passed })
}
