//! One function per subcommand. Each writes its artifacts and returns the
//! report; `--assert` failures are raised after the artifacts are on disk.

use std::path::Path;

use movwave::energy::decay_scan;
use movwave::hum::{control_bound_check, verify_null_control, HumOptions, HumProblem, HumTarget};
use movwave::observability::{
    build_counterexample, observability_budget, one_endpoint_identity, two_endpoint_identity, EndpointMode,
};
use movwave::{compute_coefficients, extend, Coefficients64, Geometry64, InitialData64, Oracle, Side};
use serde_json::{json, Value};

use crate::config::LoadedConfig;
use crate::error::CliError;
use crate::output::{num, opt, Artifacts};

pub struct Context<'a> {
    pub cfg: &'a LoadedConfig,
    pub out: &'a Path,
    pub assert: bool,
}

impl Context<'_> {
    fn artifacts(&self, command: &'static str) -> Result<Artifacts, CliError> {
        Artifacts::new(self.out, command, &self.cfg.config)
    }

    fn series(&self, g: &Geometry64, d: &InitialData64) -> Result<(Coefficients64, f64, f64), CliError> {
        let c = &self.cfg.config;
        let r = compute_coefficients(&extend(g, d), c.n, &c.quadrature.coefficients)?;
        Ok((r.coefficients, r.cross_residual, r.tail_indicator))
    }
}

/// `nt x nx` points, uniform in `t` over `[t0, t_end]` and in `x` across each slice.
fn space_time_grid(g: &Geometry64, t_end: f64, nt: usize, nx: usize) -> Result<Vec<(f64, f64)>, CliError> {
    if !(t_end > g.t0) || nt < 2 || nx < 2 {
        return Err(CliError::config("grid needs t_end > t0 and at least two points per axis"));
    }
    let mut pts = Vec::with_capacity(nt * nx);
    for i in 0..nt {
        let t = g.t0 + (t_end - g.t0) * i as f64 / (nt - 1) as f64;
        let (a, b) = g.interval_at(t)?;
        pts.extend((0..nx).map(|j| (a + (b - a) * j as f64 / (nx - 1) as f64, t)));
    }
    Ok(pts)
}

fn check(assert: bool, failures: Vec<String>, what: &str) -> Result<(), CliError> {
    if assert && !failures.is_empty() {
        Err(CliError::assertion(format!("{what} outside tolerance"), failures))
    } else {
        Ok(())
    }
}

pub fn geometry(ctx: &Context) -> Result<Value, CliError> {
    let g = ctx.cfg.geometry()?;
    let mut art = ctx.artifacts("geometry")?;
    let (d1, d2) = g.sharp_time_discrepancy();
    let report = json!({
        "meta": art.meta(),
        "constants": g,
        "alpha_beta": g.alpha_beta(),
        "rho1": g.reflection_factor(Side::Left),
        "rho2": g.reflection_factor(Side::Right),
        "initial_interval": g.initial_interval(),
        "sharp_time_discrepancy": { "T_obs1": d1, "T_obs2": d2 },
    });
    art.json("geometry.json", &report)?;
    Ok(report)
}

pub fn solve(ctx: &Context) -> Result<Value, CliError> {
    let g = ctx.cfg.geometry()?;
    let d = ctx.cfg.initial_data(&g)?;
    let s = ctx.cfg.config.solve;
    let mut art = ctx.artifacts("solve")?;
    art.tolerance("cross_tolerance", ctx.cfg.config.quadrature.coefficients.cross_tolerance);
    let (c, cross, tail) = ctx.series(&g, &d)?;
    let pts = space_time_grid(&g, s.t_end.unwrap_or(3.0 * g.t0), s.nt, s.nx)?;
    let field = c.evaluate_field(&pts)?;
    art.csv(
        "field",
        &["x", "t", "phi", "phi_x", "phi_t"],
        field.samples.iter().map(|p| vec![num(p.x), num(p.t), num(p.phi), num(p.phi_x), num(p.phi_t)]),
    )?;
    art.json("coefficients.json", &c.to_json())?;
    let report = json!({
        "meta": art.meta(),
        "N": c.n_max(),
        "S": c.s_invariant(),
        "cross_residual": cross,
        "tail_indicator": tail,
        "points": pts.len(),
    });
    art.json("solve.json", &report)?;
    Ok(report)
}

pub fn energy_scan(ctx: &Context) -> Result<Value, CliError> {
    let g = ctx.cfg.geometry()?;
    let d = ctx.cfg.initial_data(&g)?;
    let e = &ctx.cfg.config.energy_scan;
    let tol = e.tolerance;
    let mut art = ctx.artifacts("energy-scan")?;
    art.tolerance("identity_relative", tol);
    art.tolerance("envelope_relative", tol);
    let times = match &e.times {
        Some(ts) => ts.clone(),
        None => {
            let t_end = e.t_end.unwrap_or(10.0 * g.t0);
            if e.count == 1 {
                vec![g.t0]
            } else {
                (0..e.count).map(|k| g.t0 + (t_end - g.t0) * k as f64 / (e.count - 1) as f64).collect()
            }
        }
    };
    let (c, _, _) = ctx.series(&g, &d)?;
    let reports = decay_scan(&c, &times, ctx.cfg.config.quadrature.energy_nodes)?;
    art.csv(
        "energy",
        &["t", "E", "tE", "S", "lower", "upper", "residual"],
        reports.iter().map(|r| {
            vec![
                num(r.t),
                num(r.energy),
                num(r.t_energy()),
                num(r.s),
                num(r.lower),
                num(r.upper),
                num(r.identity_residual),
            ]
        }),
    )?;
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for r in &reports {
        let rel = if r.s > 0.0 { r.identity_residual / r.s } else { r.identity_residual };
        worst = worst.max(rel);
        if rel > tol {
            failures.push(format!("t = {}: identity residual {rel:e} of S", r.t));
        }
        if !r.within_bounds(tol) {
            failures.push(format!("t = {}: E = {} outside [{}, {}]", r.t, r.energy, r.lower, r.upper));
        }
    }
    let report = json!({
        "meta": art.meta(),
        "S": c.s_invariant(),
        "max_relative_residual": worst,
        "all_within_envelope": reports.iter().all(|r| r.within_bounds(tol)),
        "passed": failures.is_empty(),
        "failures": failures,
    });
    art.json("energy_scan.json", &report)?;
    check(ctx.assert, failures, "energy identity or envelope")?;
    Ok(report)
}

pub fn observe(ctx: &Context) -> Result<Value, CliError> {
    let g = ctx.cfg.geometry()?;
    let d = ctx.cfg.initial_data(&g)?;
    let o = &ctx.cfg.config.observe;
    let quad = ctx.cfg.config.quadrature.trace_nodes;
    let mut art = ctx.artifacts("observe")?;
    art.tolerance("identity_relative", o.tolerance);
    let (c, _, _) = ctx.series(&g, &d)?;
    let mut failures = Vec::new();
    let mut one = Vec::new();
    for side in [Side::Right, Side::Left] {
        for &m in &o.one_endpoint_m {
            let r = one_endpoint_identity(&c, side, m, quad)?;
            if r.relative_residual() > o.tolerance {
                failures.push(format!("one endpoint {side:?} M = {m}: relative residual {:e}", r.relative_residual()));
            }
            one.push(json!({ "report": r, "relative_residual": r.relative_residual() }));
        }
    }
    let mut two = Vec::new();
    for &m in &o.two_endpoint_m {
        let r = two_endpoint_identity(&c, m, quad)?;
        if r.relative_residual() > o.tolerance {
            failures.push(format!("two endpoints M = {m}: relative residual {:e}", r.relative_residual()));
        }
        two.push(json!({ "report": r, "relative_residual": r.relative_residual() }));
    }
    let report = json!({
        "meta": art.meta(),
        "S": c.s_invariant(),
        "one_endpoint": one,
        "two_endpoint": two,
        "passed": failures.is_empty(),
        "failures": failures,
    });
    art.json("observe.json", &report)?;
    check(ctx.assert, failures, "trace identity")?;
    Ok(report)
}

pub fn counterexample(ctx: &Context) -> Result<Value, CliError> {
    let g = ctx.cfg.geometry()?;
    let k = ctx.cfg.config.counterexample;
    let mut art = ctx.artifacts("counterexample")?;
    art.tolerance("silence_ratio", k.tolerance);
    let ce = build_counterexample(&g, k.epsilon, k.mode, k.n)?;
    let n = k.samples.max(2);
    let t_full = g.alpha_beta() * g.t0;
    let c = &ce.coefficients;
    art.csv(
        "traces",
        &["t", "trace_left", "trace_right", "predicted_left", "predicted_right"],
        (0..n).map(|i| {
            let t = g.t0 + (t_full - g.t0) * i as f64 / (n - 1) as f64;
            vec![
                num(t),
                num(c.boundary_trace(Side::Left, t)),
                num(c.boundary_trace(Side::Right, t)),
                opt(ce.predicted_trace(Side::Left, t)),
                opt(ce.predicted_trace(Side::Right, t)),
            ]
        }),
    )?;
    art.json("counterexample_coefficients.json", &c.to_json())?;
    let sides: &[Side] = match k.mode {
        EndpointMode::OneEndpoint => &[Side::Right],
        EndpointMode::TwoEndpoint => &[Side::Left, Side::Right],
    };
    let mut failures = Vec::new();
    let mut silence = Vec::new();
    for &side in sides {
        let s = ce.silence(side, n);
        if s.ratio() > k.tolerance {
            failures.push(format!("{side:?}: silent sup / peak = {:e}", s.ratio()));
        }
        if !(s.full_window_integral > 0.0) {
            failures.push(format!("{side:?}: trace vanishes on the full window"));
        }
        silence.push(json!({ "report": s, "ratio": s.ratio() }));
    }
    if !ce.resolved {
        failures.push(format!("truncation does not resolve the profile (tail {:e})", ce.tail_indicator));
    }
    let report = json!({
        "meta": art.meta(),
        "epsilon": ce.epsilon,
        "mode": ce.mode,
        "N": c.n_max(),
        "silent_window": ce.silent_window,
        "profile": ce.profile,
        "resolved": ce.resolved,
        "tail_indicator": ce.tail_indicator,
        "silence": silence,
        "passed": failures.is_empty(),
        "failures": failures,
    });
    art.json("counterexample.json", &report)?;
    check(ctx.assert, failures, "counterexample silence")?;
    Ok(report)
}

pub fn control(ctx: &Context) -> Result<Value, CliError> {
    let g = ctx.cfg.geometry()?;
    let u = ctx.cfg.initial_data(&g)?;
    let k = ctx.cfg.config.control;
    let horizon = k.horizon.unwrap_or(match k.mode {
        EndpointMode::OneEndpoint => g.t_obs1,
        EndpointMode::TwoEndpoint => g.t_obs2,
    });
    let mut art = ctx.artifacts("control")?;
    art.tolerance("cg_relative_residual", k.tol);
    art.tolerance("terminal_energy_ratio", k.terminal_tolerance);
    let p = HumProblem::new(&g, horizon, k.mode, k.nodes)?;
    let opts = HumOptions { nodes: k.nodes, control_samples: k.control_samples, tol: k.tol, max_iter: k.max_iter };
    let sol = p.synthesize_control(&HumTarget::Data(u.clone()), &opts)?;
    for v in &sol.controls {
        let stem = match v.side {
            Side::Left => "control_left",
            Side::Right => "control_right",
        };
        art.csv(stem, &["t", "v"], v.rows().iter().map(|r| vec![num(r.t), num(r.v)]))?;
    }
    let check_rep = verify_null_control(&g, &u, &sol.as_controls(), horizon, ctx.cfg.config.quadrature.oracle_samples)?;
    let refs: Vec<_> = sol.controls.iter().collect();
    let bound_ok = if check_rep.initial_energy > 0.0 {
        Some(control_bound_check(&g, &refs, check_rep.initial_energy, horizon, k.mode)?)
    } else {
        None
    };
    let mut failures = Vec::new();
    if check_rep.terminal_energy_ratio > k.terminal_tolerance {
        failures.push(format!("terminal energy ratio {:e}", check_rep.terminal_energy_ratio));
    }
    let report = json!({
        "meta": art.meta(),
        "mode": k.mode,
        "horizon": horizon,
        "budget": observability_budget(&g, horizon, k.mode)?,
        "iterations": sol.iterations,
        "residual": sol.residual,
        "converged": sol.converged,
        "log": sol.log,
        "null_control": check_rep,
        "control_bound_ok": bound_ok,
        "passed": failures.is_empty() && sol.converged,
        "failures": failures,
    });
    art.json("control.json", &report)?;
    if !sol.converged {
        return Err(CliError::numeric(format!(
            "conjugate gradients stopped at residual {:e} after {} iterations",
            sol.residual, sol.iterations
        )));
    }
    check(ctx.assert, failures, "null control")?;
    Ok(report)
}

pub fn compare_oracle(ctx: &Context) -> Result<Value, CliError> {
    let g = ctx.cfg.geometry()?;
    let d = ctx.cfg.initial_data(&g)?;
    let k = ctx.cfg.config.compare_oracle;
    let mut art = ctx.artifacts("compare-oracle")?;
    art.tolerance("max_abs_difference", k.tolerance);
    let (c, _, _) = ctx.series(&g, &d)?;
    let pts = space_time_grid(&g, k.t_end.unwrap_or(3.0 * g.t0), k.nt, k.nx)?;
    let series = c.evaluate_field(&pts)?;
    let oracle = Oracle::new(&g, &d, ctx.cfg.config.quadrature.oracle_samples)?.solve_homogeneous(&pts)?;
    let (mut dx, mut dt) = (0.0f64, 0.0f64);
    for (a, b) in series.samples.iter().zip(&oracle.samples) {
        dx = dx.max((a.phi_x - b.phi_x).abs());
        dt = dt.max((a.phi_t - b.phi_t).abs());
    }
    art.csv(
        "compare_oracle",
        &["x", "t", "phi_series", "phi_oracle", "difference"],
        series
            .samples
            .iter()
            .zip(&oracle.samples)
            .map(|(a, b)| vec![num(a.x), num(a.t), num(a.phi), num(b.phi), num(a.phi - b.phi)]),
    )?;
    let diff = series.max_abs_difference(&oracle);
    let failures = if diff < k.tolerance { Vec::new() } else { vec![format!("max |series - oracle| = {diff:e}")] };
    let report = json!({
        "meta": art.meta(),
        "N": c.n_max(),
        "points": pts.len(),
        "max_abs_difference": diff,
        "max_phi_x_difference": dx,
        "max_phi_t_difference": dt,
        "passed": failures.is_empty(),
        "failures": failures,
    });
    art.json("compare_oracle.json", &report)?;
    check(ctx.assert, failures, "series and oracle")?;
    Ok(report)
}
