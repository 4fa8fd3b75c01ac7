use crate::config::{ProfileMethod, RunConfig};
use crate::{CliError, Outcome};
use layerstab::dynamics::{measure_decay, nonlinear_evolve_1d, LinearizedOperator, NormKind};
use layerstab::energy::{audit_linearized, write_energy_csv, EnergyError, LinearizedAuditOptions};
use layerstab::evans::{
    check_condition_d, winding_number, Contour, EvansError, EvansFunction, LayerProblem, WindingOptions,
};
use layerstab::io::{self, write_json_file};
use layerstab::linalg::{CVector, RVector};
use layerstab::model::{
    check_constant_multiplicity, check_genuine_coupling, check_hyperbolicity, check_noncharacteristic,
    check_structure, find_branch_points, BuiltModel, FlowCase, HypothesisReport,
};
use layerstab::profile::{
    explicit_transverse, layer_grid, solve_profile_with, uniform_grid, verify_decay, Profile, ProfileError,
    ShootingOptions, WallConstraints,
};
use layerstab::sweep::{run_sweep, write_sweep_csv};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub out: &'a Path,
    pub seed: u64,
}

fn numeric(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<(), CliError> {
    write_json_file(&out.join(name), value).map_err(numeric)
}

fn verdict(passed: bool, what: &str) -> Outcome {
    if passed {
        Outcome::Pass
    } else {
        Outcome::AuditFailed(format!("{what} failed"))
    }
}

fn build(ctx: &Context) -> Result<BuiltModel, CliError> {
    ctx.config.model()?.build().map_err(|e| CliError::Config(format!("model: {e}")))
}

fn flow_case(ctx: &Context, model: &BuiltModel) -> Result<FlowCase, CliError> {
    if let Some(case) = ctx.config.profile.case {
        return Ok(case);
    }
    check_noncharacteristic(model.system.as_ref(), &model.end_state, &model.wall_state)
        .case
        .ok_or_else(|| CliError::Audit("wall is characteristic; no flow case applies".into()))
}

fn profile_error(e: ProfileError, model: &BuiltModel) -> CliError {
    match e {
        ProfileError::NoConnection { .. } => {
            let hint = match model.isentropic {
                Some(p) if p.v_wall > 0.0 && p.u_inf != 0.0 => {
                    "; inflow layers exist only for purely normal flow (u_inf = 0), with a tangential \
                     far-field velocity the layer cannot attach to the wall"
                }
                _ => "",
            };
            CliError::Audit(format!("{e}{hint}"))
        }
        ProfileError::NonuniqueOutflow { .. } => CliError::Audit(e.to_string()),
        ProfileError::InvalidInput(_) => CliError::Config(format!("profile: {e}")),
        other => CliError::Numeric(other.to_string()),
    }
}

pub fn layer_profile(ctx: &Context, model: &BuiltModel, case: FlowCase) -> Result<Profile, CliError> {
    let cfg = &ctx.config.profile;
    let sys = model.system.as_ref();
    if cfg.method == ProfileMethod::Explicit {
        let p = model
            .isentropic
            .ok_or_else(|| CliError::Config("profile.method: explicit needs the isentropic model".into()))?;
        let x_max = cfg.x_max.unwrap_or(30.0 * p.mu / (p.rho0 * p.v_wall.abs()));
        return explicit_transverse(&p, &layer_grid(x_max, cfg.nodes)).map_err(|e| profile_error(e, model));
    }
    let wall = match (&model.isentropic, &cfg.wall_w) {
        (_, Some(w)) => WallConstraints { case, w_values: RVector::from_vec(w.clone()) },
        (Some(p), None) => WallConstraints::isentropic(p, case),
        (None, None) => {
            let w = sys.to_w(&model.wall_state);
            let first = match case {
                FlowCase::Outflow => sys.hyperbolic_size(),
                FlowCase::Inflow => 0,
            };
            WallConstraints { case, w_values: w.rows(first, w.len() - first).into_owned() }
        }
    };
    let options = ShootingOptions { nodes: cfg.nodes, x_max: cfg.x_max, ..ShootingOptions::default() };
    solve_profile_with(sys, &model.end_state, &wall, &options).map_err(|e| profile_error(e, model))
}

pub fn check(ctx: &Context) -> Result<Outcome, CliError> {
    let model = build(ctx)?;
    let sys = model.system.as_ref();
    let sampling = &ctx.config.sampling;
    let mut states = vec![model.end_state.u_plus.clone(), model.wall_state.clone()];
    states.extend(sampling.states.iter().map(|s| RVector::from_vec(s.clone())));
    if states.iter().any(|s| s.len() != sys.size()) {
        return Err(CliError::Config(format!("sampling.states: every state needs {} components", sys.size())));
    }
    let mut report = HypothesisReport::new(sys.name());
    report.merge(check_structure(sys, &states, sampling.directions));
    let class = check_noncharacteristic(sys, &model.end_state, &model.wall_state);
    report.h1 = Some(class.verdict);
    report.case = class.case;
    report.merge(check_hyperbolicity(sys, &model.end_state));
    report.merge(check_constant_multiplicity(sys, &model.end_state, sampling.directions));
    let xi = vec![1.0; sys.dimension() - 1];
    report.merge(find_branch_points(sys, &model.end_state, &xi));
    report.merge(check_genuine_coupling(sys, &model.end_state, sampling.directions));
    write_json(ctx.out, "report.json", &report)?;
    Ok(verdict(report.all_passed(), "hypothesis audit"))
}

pub fn profile(ctx: &Context) -> Result<Outcome, CliError> {
    let model = build(ctx)?;
    let case = flow_case(ctx, &model)?;
    let profile = layer_profile(ctx, &model, case)?;
    profile.write(&ctx.out.join("profile.csv")).map_err(numeric)?;
    if profile.amplitude() > 0.0 {
        let decay = verify_decay(&profile, 2).map_err(numeric)?;
        write_json(ctx.out, "decay.json", &decay)?;
        return Ok(verdict(decay.passed, "profile decay check"));
    }
    Ok(Outcome::Pass)
}

fn evans_for(model: &BuiltModel, profile: &Arc<Profile>, case: FlowCase, ctx: &Context) -> impl Fn(&[f64]) -> Result<EvansFunction, EvansError> + Sync {
    let sys = model.system.clone();
    let profile = profile.clone();
    let options = ctx.config.tolerances.evans;
    move |xi: &[f64]| {
        let problem = LayerProblem::new(sys.clone(), profile.clone(), xi.to_vec(), case)?;
        EvansFunction::new(Arc::new(problem), options)
    }
}

/// Tangential frequency vector `(xi, 0, ...)` for a system of dimension `d`.
fn xi_vector(d: usize, xi: f64) -> Vec<f64> {
    let mut v = vec![0.0; d - 1];
    if let Some(first) = v.first_mut() {
        *first = xi;
    }
    v
}

fn contour_for(ctx: &Context, xi: f64) -> Contour {
    let r = &ctx.config.region;
    Contour::semicircle(r.radius, if xi == 0.0 { r.origin_ball } else { 0.0 })
}

pub fn condition_d(ctx: &Context) -> Result<Outcome, CliError> {
    let model = build(ctx)?;
    let case = flow_case(ctx, &model)?;
    let profile = Arc::new(layer_profile(ctx, &model, case)?);
    let make = evans_for(&model, &profile, case, ctx);
    let d = model.system.dimension();
    let winding = ctx.config.tolerances.winding;
    let mut reports = Vec::new();
    for &xi in &ctx.config.region.xi_grid {
        let grid = [xi_vector(d, xi)];
        reports.push(check_condition_d(&make, &grid, &contour_for(ctx, xi), &winding, ctx.config.region.margin_tol));
    }
    let passed = !reports.is_empty() && reports.iter().all(|r| r.passed);
    let min_margin = reports.iter().map(|r| r.min_margin).fold(f64::INFINITY, f64::min);
    let worst = reports
        .iter()
        .filter(|r| r.min_margin <= min_margin)
        .find_map(|r| r.worst_xi.clone());
    let entries: Vec<_> = reports.into_iter().flat_map(|r| r.entries).collect();
    #[derive(Serialize)]
    struct Summary<'a, E> {
        passed: bool,
        min_margin: f64,
        worst_xi: Option<Vec<f64>>,
        margin_tol: f64,
        radius: f64,
        entries: &'a [E],
    }
    let summary = Summary {
        passed,
        min_margin: if min_margin.is_finite() { min_margin } else { 0.0 },
        worst_xi: worst,
        margin_tol: ctx.config.region.margin_tol,
        radius: ctx.config.region.radius,
        entries: &entries,
    };
    write_json(ctx.out, "condition_d.json", &summary)?;
    Ok(verdict(passed, "condition (D)"))
}

pub fn evans_map(ctx: &Context) -> Result<Outcome, CliError> {
    let model = build(ctx)?;
    let case = flow_case(ctx, &model)?;
    let profile = Arc::new(layer_profile(ctx, &model, case)?);
    let make = evans_for(&model, &profile, case, ctx);
    let d = model.system.dimension();
    let region = &ctx.config.region;
    let winding_options: WindingOptions = ctx.config.tolerances.winding;
    let header: Vec<String> =
        ["xi", "re_lambda", "im_lambda", "abs_D", "arg_D"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    let mut windings = Vec::new();
    for &xi in &region.xi_grid {
        let evans = make(&xi_vector(d, xi)).map_err(numeric)?;
        for k in 0..region.map_samples {
            let im = -region.radius + 2.0 * region.radius * k as f64 / (region.map_samples - 1) as f64;
            let lambda = Complex64::new(region.map_re, im);
            let (abs, arg) = match evans.eval(lambda) {
                Ok(dv) => (dv.norm(), dv.arg()),
                Err(_) => (f64::NAN, f64::NAN),
            };
            rows.push(vec![xi, region.map_re, im, abs, arg]);
        }
        #[derive(Serialize)]
        struct Entry {
            xi: f64,
            winding: Option<i64>,
            min_abs_d: Option<f64>,
            error: Option<String>,
        }
        let entry = match winding_number(&evans, &xi_vector(d, xi), &contour_for(ctx, xi), &winding_options) {
            Ok(r) => Entry { xi, winding: Some(r.winding), min_abs_d: Some(r.min_abs_d), error: None },
            Err(e) => Entry { xi, winding: None, min_abs_d: None, error: Some(e.to_string()) },
        };
        windings.push(entry);
    }
    io::write_table_file(&ctx.out.join("evans_map.csv"), &header, &rows).map_err(numeric)?;
    write_json(ctx.out, "windings.json", &serde_json::json!({ "entries": windings }))?;
    Ok(Outcome::Pass)
}

/// Smooth random initial data `sum_k c_k x e^{-x/s_k}` scaled to `amplitude` in sup norm.
fn random_initial(grid: &[f64], n: usize, amplitude: f64, rng: &mut ChaCha8Rng) -> Vec<CVector> {
    let terms: Vec<(f64, Vec<f64>)> =
        (0..3).map(|_| (rng.gen_range(0.5..3.0), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())).collect();
    let raw: Vec<CVector> = grid
        .iter()
        .map(|&x| {
            CVector::from_fn(n, |i, _| {
                Complex64::from(terms.iter().map(|(s, c)| c[i] * x * (-x / s).exp()).sum::<f64>())
            })
        })
        .collect();
    let sup = raw.iter().map(|v| v.camax()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    raw.into_iter().map(|v| v * Complex64::from(amplitude / sup)).collect()
}

pub fn simulate(ctx: &Context) -> Result<Outcome, CliError> {
    let model = build(ctx)?;
    let case = flow_case(ctx, &model)?;
    let profile = layer_profile(ctx, &model, case)?;
    let sys = model.system.as_ref();
    let cfg = &ctx.config.simulate;
    let d = sys.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    #[derive(Serialize)]
    struct ModeSummary {
        xi: f64,
        final_l2: f64,
        decay_rate: Option<f64>,
        r_squared: Option<f64>,
    }
    let mut modes = Vec::new();
    for &xi in &cfg.xi_grid {
        let grid = uniform_grid(cfg.x_max, cfg.nodes);
        let op = LinearizedOperator::layer(sys, &profile, &xi_vector(d, xi), case, grid.clone()).map_err(numeric)?;
        let u0 = random_initial(&grid, sys.size(), cfg.amplitude, &mut rng);
        let zero = CVector::zeros(op.wall_conditions());
        let (record, _) = op.evolve(&u0, &|_| zero.clone(), None, &cfg.evolve).map_err(numeric)?;
        record.write_csv(&ctx.out.join(format!("trajectory_xi{xi}.csv"))).map_err(numeric)?;
        let fit = measure_decay(&record, NormKind::L2, (0.5 * cfg.evolve.t_end, cfg.evolve.t_end)).ok();
        modes.push(ModeSummary {
            xi,
            final_l2: record.l2.last().copied().unwrap_or(0.0),
            decay_rate: fit.map(|f| f.rate),
            r_squared: fit.map(|f| f.r_squared),
        });
    }
    let mut nonlinear = None;
    if let Some(options) = &cfg.nonlinear {
        let n = sys.size();
        let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scale = cfg.amplitude / coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(f64::MIN_POSITIVE);
        let shape = |x: f64| RVector::from_fn(n, |i, _| scale * coeffs[i] * x * (1.0 - x).exp());
        let k = case.boundary_condition_count(n, sys.parabolic_rank());
        let run = nonlinear_evolve_1d(sys, &profile, case, &shape, &|_| RVector::zeros(k), options).map_err(numeric)?;
        run.record.write_csv(&ctx.out.join("nonlinear.csv")).map_err(numeric)?;
        nonlinear = Some(serde_json::json!({
            "steps": run.steps,
            "dt": run.dt,
            "max_drift": run.max_drift,
            "initial_l2": run.record.l2.first(),
            "final_l2": run.record.l2.last(),
        }));
    }
    write_json(ctx.out, "simulate.json", &serde_json::json!({ "seed": ctx.seed, "modes": modes, "nonlinear": nonlinear }))?;
    Ok(Outcome::Pass)
}

pub fn energy_audit(ctx: &Context) -> Result<Outcome, CliError> {
    let model = build(ctx)?;
    let case = flow_case(ctx, &model)?;
    let profile = layer_profile(ctx, &model, case)?;
    let sys = model.system.as_ref();
    let cfg = &ctx.config.energy;
    let options = LinearizedAuditOptions {
        order: cfg.order,
        c_star: cfg.c_star,
        evolve: cfg.evolve,
        gronwall: cfg.gronwall.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut audits = Vec::new();
    let mut failures = Vec::new();
    for &xi in &cfg.xi_grid {
        let grid = uniform_grid(cfg.x_max, cfg.nodes);
        let u0 = random_initial(&grid, sys.size(), 1.0, &mut rng);
        match audit_linearized(sys, &profile, &xi_vector(sys.dimension(), xi), case, grid, &u0, &options) {
            Ok(a) => {
                write_energy_csv(&ctx.out.join(format!("energy_xi{xi}.csv")), &a.samples).map_err(numeric)?;
                audits.push(serde_json::json!({ "xi": xi, "report": a.report, "m": a.m, "eps": a.eps }));
            }
            Err(e @ EnergyError::NoFeasiblePair { .. }) => {
                failures.push(format!("xi = {xi}: {e}"));
                audits.push(serde_json::json!({ "xi": xi, "error": e.to_string() }));
            }
            Err(e) => return Err(numeric(e)),
        }
    }
    write_json(ctx.out, "energy_audit.json", &serde_json::json!({ "seed": ctx.seed, "audits": audits }))?;
    if failures.is_empty() {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::AuditFailed(failures.join("; ")))
    }
}

pub fn sweep(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = ctx.config.sweep.as_ref().ok_or_else(|| CliError::Config("sweep: missing section".into()))?;
    let rows = run_sweep(&cfg.grid.points(), &cfg.options, true);
    let path = ctx.out.join("sweep.csv");
    let file = File::create(&path).map_err(|e| CliError::Numeric(format!("cannot write {}: {e}", path.display())))?;
    write_sweep_csv(BufWriter::new(file), &rows).map_err(numeric)?;
    let failed = rows.iter().filter(|r| !r.passed).count();
    Ok(verdict(failed == 0, &format!("{failed} sweep points")))
}
