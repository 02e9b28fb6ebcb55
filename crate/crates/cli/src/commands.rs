//! Subcommand implementations. Each returns a structured error that maps to
//! the exit-code contract: 0 pass, 1 check failure, 2 invalid input,
//! 3 solver non-convergence.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use groundstate::analysis::{
    check_comparison, critical_blowup_fit, envelope_report, membership_report, asymptotic_product_check,
};
use groundstate::exponents::{
    check_critical_condition, check_scale_identities, derive_scaling, Regime, ScalingReport,
};
use groundstate::field::RadialField;
use groundstate::greens::{newton_potential, verify_limit_integral};
use groundstate::solver::{
    bisect_with_widening, compute_residuals, picard_solve, GroundState, SolveMethod, SolverError,
};
use groundstate::SystemParams;

use crate::config::{Format, Method, RunConfig};
use crate::output::{checks_to_csv, format_g17, write_json, write_text, CheckRow};

#[derive(Debug)]
pub enum CmdError {
    /// Malformed input or violated hypotheses: exit 2.
    Invalid(String),
    /// Solver non-convergence or bracket failure: exit 3.
    SolverFailed(String),
    /// One or more checks missed their tolerance: exit 1.
    ChecksFailed,
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::ChecksFailed => 1,
            CmdError::Invalid(_) => 2,
            CmdError::SolverFailed(_) => 3,
        }
    }
}

fn solver_error(err: SolverError) -> CmdError {
    match err {
        SolverError::BracketFailure { .. }
        | SolverError::NonConvergence { .. }
        | SolverError::PicardDiverged { .. }
        | SolverError::ResidualExceeded { .. }
        | SolverError::LostPositivity { .. } => CmdError::SolverFailed(err.to_string()),
        other => CmdError::Invalid(other.to_string()),
    }
}

const SCALING_HEADER: &str = "n,p,q,r,s,valid,admissible,regime,a,b,u_exponent,u_log_power,\
v_exponent,v_log_power,c_nqs,asymptotic_constant,scale_identity_residual_first,scale_identity_residual_second,\
on_critical_hyperbola,critical_residual,error";

fn scaling_row(params: &SystemParams, report: Option<&ScalingReport>, error: &str) -> String {
    let mut row = format!(
        "{},{},{},{},{}",
        params.n,
        format_g17(params.p),
        format_g17(params.q),
        format_g17(params.r),
        format_g17(params.s)
    );
    match report {
        Some(rep) => {
            let (r1, r2) = check_scale_identities(rep);
            let (on, res) = check_critical_condition(rep);
            let opt = |x: Option<f64>| x.map(format_g17).unwrap_or_default();
            let _ = write!(
                row,
                ",true,{},{},{},{},{},{},{},{},{},{},{},{},{},{},",
                rep.admissible,
                rep.regime,
                format_g17(rep.a),
                format_g17(rep.b),
                format_g17(rep.u_profile.exponent),
                format_g17(rep.u_profile.log_power),
                format_g17(rep.v_profile.exponent),
                format_g17(rep.v_profile.log_power),
                opt(rep.c_nqs),
                opt(rep.asymptotic_constant),
                format_g17(r1),
                format_g17(r2),
                on,
                format_g17(res)
            );
        }
        None => {
            let _ = write!(row, ",false,,,,,,,,,,,,,,{error}");
        }
    }
    row
}

fn effective_formats(config: &RunConfig, flag: Option<Format>) -> Vec<Format> {
    match flag {
        Some(f) => vec![f],
        None => config.output.formats.clone(),
    }
}

fn out_dir(config: &RunConfig, flag: &Option<PathBuf>) -> PathBuf {
    flag.clone().unwrap_or_else(|| config.output.directory.clone())
}

pub fn cmd_classify(
    config: &RunConfig,
    out_flag: &Option<PathBuf>,
    format: Option<Format>,
) -> Result<(), CmdError> {
    let report = derive_scaling(&config.params);
    let dir = out_dir(config, out_flag);
    let formats = effective_formats(config, format);

    let (r1, r2) = check_scale_identities(&report);
    let (on_hyperbola, residual) = check_critical_condition(&report);
    println!(
        "params (n={}, p={}, q={}, r={}, s={}): regime {}, a = {:.12}, b = {:.12}, admissible: {}",
        config.params.n,
        config.params.p,
        config.params.q,
        config.params.r,
        config.params.s,
        report.regime,
        report.a,
        report.b,
        report.admissible
    );
    println!(
        "u profile exponent {} (log power {}), v profile exponent {} (log power {})",
        report.u_profile.exponent,
        report.u_profile.log_power,
        report.v_profile.exponent,
        report.v_profile.log_power
    );
    println!(
        "scale identity residuals ({r1:.3e}, {r2:.3e}); critical condition: {} (residual {residual:.3e})",
        on_hyperbola
    );
    if let (Some(c), Some(t4)) = (report.c_nqs, report.asymptotic_constant) {
        println!("threshold constant {c}, asymptotic product constant {t4}");
    }

    if formats.contains(&Format::Csv) {
        let csv = format!(
            "{SCALING_HEADER}\n{}\n",
            scaling_row(&config.params, Some(&report), "")
        );
        write_text(&dir, "classify.csv", &csv).map_err(CmdError::Invalid)?;
    }
    if formats.contains(&Format::Json) {
        write_json(
            &dir,
            "classify.json",
            &serde_json::to_value(&report).expect("report serializes"),
        )
        .map_err(CmdError::Invalid)?;
    }

    if !report.admissible {
        return Err(CmdError::Invalid(format!(
            "parameters are inadmissible: a = {}, b = {} must exceed n/(n-2) = {}",
            report.a,
            report.b,
            config.params.serrin()
        )));
    }
    Ok(())
}

fn solve_state(config: &RunConfig) -> Result<(GroundState, Option<GroundState>), CmdError> {
    let grid = config
        .grid
        .build(config.params.n)
        .map_err(|e| CmdError::Invalid(e.to_string()))?;
    let shooting = bisect_with_widening(&config.params, &config.solver.shooting, &grid, 3)
        .map_err(solver_error)?;
    match config.solver.method {
        Method::Shooting => Ok((shooting, None)),
        Method::Picard => {
            let refined = picard_solve(
                &config.params,
                &shooting,
                config.solver.picard.damping,
                config.solver.picard.max_iters,
            )
            .map_err(solver_error)?;
            Ok((refined, None))
        }
        Method::Both => {
            let refined = picard_solve(
                &config.params,
                &shooting,
                config.solver.picard.damping,
                config.solver.picard.max_iters,
            )
            .map_err(solver_error)?;
            Ok((shooting, Some(refined)))
        }
    }
}

fn state_json(state: &GroundState) -> serde_json::Value {
    json!({
        "params": state.params,
        "scaling": state.scaling,
        "method": match state.method { SolveMethod::Shooting => "shooting", SolveMethod::Picard => "picard" },
        "beta_star": state.beta_star,
        "residuals": state.residuals,
        "diagnostics": state.diagnostics,
    })
}

pub fn cmd_solve(
    config: &RunConfig,
    out_flag: &Option<PathBuf>,
    _format: Option<Format>,
) -> Result<(), CmdError> {
    let dir = out_dir(config, out_flag);
    let (state, secondary) = solve_state(config)?;

    std::fs::create_dir_all(&dir).map_err(|e| CmdError::Invalid(e.to_string()))?;
    state
        .u
        .save(&dir.join("u"))
        .and_then(|_| state.v.save(&dir.join("v")))
        .map_err(|e| CmdError::Invalid(e.to_string()))?;

    let mut diag = state_json(&state);
    if let Some(other) = &secondary {
        other
            .u
            .save(&dir.join("u_picard"))
            .and_then(|_| other.v.save(&dir.join("v_picard")))
            .map_err(|e| CmdError::Invalid(e.to_string()))?;
        let mut worst = 0.0f64;
        for (i, &rho) in state.u.grid().nodes().iter().enumerate() {
            if rho > 10.0 {
                break;
            }
            let du = (state.u.values()[i] - other.u.values()[i]).abs() / state.u.values()[i];
            let dv = (state.v.values()[i] - other.v.values()[i]).abs() / state.v.values()[i];
            worst = worst.max(du).max(dv);
        }
        diag["picard"] = state_json(other);
        diag["cross_method_max_rel_diff"] = json!(worst);
        println!("cross-method max relative difference on [rho_min, 10]: {worst:.3e}");
    }
    write_json(&dir, "diagnostics.json", &diag).map_err(CmdError::Invalid)?;

    println!(
        "beta* = {:.12}; Green residuals ({:.3e}, {:.3e}); wrote {}",
        state.beta_star,
        state.residuals.green_rel_u,
        state.residuals.green_rel_v,
        dir.display()
    );
    Ok(())
}

fn load_state(config: &RunConfig, dir: &Path) -> Result<GroundState, CmdError> {
    let invalid = |e: String| CmdError::Invalid(e);
    let u = RadialField::load(&dir.join("u")).map_err(|e| invalid(e.to_string()))?;
    let v = RadialField::load(&dir.join("v")).map_err(|e| invalid(e.to_string()))?;
    let text = std::fs::read_to_string(dir.join("diagnostics.json"))
        .map_err(|e| invalid(format!("missing diagnostics.json in {}: {e}", dir.display())))?;
    let diag: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
    let beta_star = diag["beta_star"].as_f64().unwrap_or(f64::NAN);
    let params = config.params;
    let scaling = derive_scaling(&params);
    let residuals =
        compute_residuals(&params, &u, &v).map_err(|e| invalid(e.to_string()))?;
    Ok(GroundState {
        params,
        scaling,
        u,
        v,
        beta_star,
        residuals,
        method: SolveMethod::Shooting,
        diagnostics: Default::default(),
    })
}

fn default_checks(regime: Regime) -> Vec<&'static str> {
    let mut checks = vec!["scale_identities", "comparison", "envelope", "membership"];
    match regime {
        Regime::Subcritical => {
            checks.extend_from_slice(&["limit_integral", "asymptotic_product"]);
        }
        Regime::Critical => checks.push("critical_blowup"),
        Regime::Supercritical => {}
    }
    checks
}

const KNOWN_CHECKS: &[&str] = &[
    "scale_identities",
    "critical_condition",
    "limit_integral",
    "asymptotic_product",
    "comparison",
    "envelope",
    "membership",
    "critical_blowup",
];

pub fn cmd_verify(
    config: &RunConfig,
    out_flag: &Option<PathBuf>,
    format: Option<Format>,
) -> Result<(), CmdError> {
    let dir = out_dir(config, out_flag);
    let formats = effective_formats(config, format);
    let report = derive_scaling(&config.params);

    let requested: Vec<String> = if config.checks.is_empty() {
        default_checks(report.regime)
            .into_iter()
            .map(String::from)
            .collect()
    } else {
        config.checks.clone()
    };
    for name in &requested {
        if !KNOWN_CHECKS.contains(&name.as_str()) {
            return Err(CmdError::Invalid(format!(
                "unknown check '{name}'; known checks: {}",
                KNOWN_CHECKS.join(", ")
            )));
        }
    }

    let needs_state = requested
        .iter()
        .any(|c| matches!(c.as_str(), "asymptotic_product" | "comparison" | "envelope" | "membership" | "critical_blowup"));
    let state = if needs_state {
        Some(match &config.state_dir {
            Some(dir) => load_state(config, dir)?,
            None => solve_state(config)?.0,
        })
    } else {
        None
    };

    let mut rows: Vec<CheckRow> = Vec::new();
    let mut extras = serde_json::Map::new();
    for name in &requested {
        match name.as_str() {
            "scale_identities" => {
                let (r1, r2) = check_scale_identities(&report);
                for (tag, r) in [("first", r1), ("second", r2)] {
                    rows.push(CheckRow {
                        check_name: format!("scale_identity_{tag}"),
                        predicted: 0.0,
                        measured: r,
                        rel_error: r,
                        tolerance: 1e-12,
                        pass: r <= 1e-12,
                    });
                }
            }
            "critical_condition" => {
                let (_, residual) = check_critical_condition(&report);
                rows.push(CheckRow {
                    check_name: "critical_condition".into(),
                    predicted: 0.0,
                    measured: residual,
                    rel_error: residual.abs(),
                    tolerance: 1e-10,
                    pass: residual.abs() <= 1e-10,
                });
            }
            "limit_integral" => {
                let check = verify_limit_integral(&config.params, None)
                    .map_err(|e| CmdError::Invalid(e.to_string()))?;
                rows.push(CheckRow {
                    check_name: "limit_integral".into(),
                    predicted: check.closed_form,
                    measured: check.quadrature,
                    rel_error: check.rel_error,
                    tolerance: 1e-6,
                    pass: check.rel_error <= 1e-6,
                });
            }
            "asymptotic_product" => {
                let state = state.as_ref().expect("state present");
                let t4 = asymptotic_product_check(state, config.fit_window)
                    .map_err(|e| CmdError::Invalid(e.to_string()))?;
                rows.push(CheckRow {
                    check_name: "asymptotic_product".into(),
                    predicted: t4.predicted,
                    measured: t4.measured,
                    rel_error: t4.rel_error,
                    tolerance: 0.05,
                    pass: t4.rel_error <= 0.05 && t4.below_threshold,
                });
                extras.insert(
                    "asymptotic_product".into(),
                    serde_json::to_value(t4).expect("serializable"),
                );
            }
            "comparison" => {
                let state = state.as_ref().expect("state present");
                let violation = check_comparison(state)
                    .map_err(|e| CmdError::Invalid(e.to_string()))?;
                rows.push(CheckRow {
                    check_name: "comparison_violation".into(),
                    predicted: 0.0,
                    measured: violation,
                    rel_error: violation.max(0.0),
                    tolerance: 1e-8,
                    pass: violation <= 1e-8,
                });
            }
            "envelope" => {
                let state = state.as_ref().expect("state present");
                let env = envelope_report(state).map_err(|e| CmdError::Invalid(e.to_string()))?;
                for (tag, value, pass) in [
                    ("envelope_sup_u", env.sup_ratio_u, env.sup_ratio_u.is_finite()),
                    ("envelope_inf_u", env.inf_ratio_u, env.inf_ratio_u > 0.0),
                    ("envelope_sup_v", env.sup_ratio_v, env.sup_ratio_v.is_finite()),
                    ("envelope_inf_v", env.inf_ratio_v, env.inf_ratio_v > 0.0),
                ] {
                    rows.push(CheckRow {
                        check_name: tag.into(),
                        predicted: 0.0,
                        measured: value,
                        rel_error: 0.0,
                        tolerance: 0.0,
                        pass,
                    });
                }
                extras.insert("envelope".into(), serde_json::to_value(env).expect("serializable"));
            }
            "membership" => {
                let state = state.as_ref().expect("state present");
                let memb = membership_report(state).map_err(|e| CmdError::Invalid(e.to_string()))?;
                rows.push(CheckRow {
                    check_name: format!("membership_u_sigma_{}", format_g17(memb.u_sigma)),
                    predicted: 0.0,
                    measured: memb.u_norm,
                    rel_error: 0.0,
                    tolerance: 0.0,
                    pass: memb.u_norm.is_finite(),
                });
                for (sigma, norm) in &memb.v_norms {
                    rows.push(CheckRow {
                        check_name: format!("membership_v_sigma_{}", format_g17(*sigma)),
                        predicted: 0.0,
                        measured: *norm,
                        rel_error: 0.0,
                        tolerance: 0.0,
                        pass: norm.is_finite(),
                    });
                }
                extras.insert("membership".into(), serde_json::to_value(&memb).expect("serializable"));
            }
            "critical_blowup" => {
                let state = state.as_ref().expect("state present");
                let fit = critical_blowup_fit(state, config.blowup_ladder.as_deref())
                    .map_err(|e| CmdError::Invalid(e.to_string()))?;
                let target = 1.0 / (1.0 - config.params.s);
                let rel = (fit.slope - target).abs() / target;
                rows.push(CheckRow {
                    check_name: "critical_blowup_slope".into(),
                    predicted: target,
                    measured: fit.slope,
                    rel_error: rel,
                    tolerance: 0.15,
                    pass: rel <= 0.15,
                });
                extras.insert("critical_blowup".into(), serde_json::to_value(fit).expect("serializable"));
            }
            _ => unreachable!("validated above"),
        }
    }

    for row in &rows {
        println!(
            "{} {}: predicted {}, measured {}, rel_error {:.3e}",
            if row.pass { "PASS" } else { "FAIL" },
            row.check_name,
            row.predicted,
            row.measured,
            row.rel_error
        );
    }
    if formats.contains(&Format::Csv) {
        write_text(&dir, "checks.csv", &checks_to_csv(&rows)).map_err(CmdError::Invalid)?;
    }
    if formats.contains(&Format::Json) {
        let value = json!({
            "checks": rows,
            "diagnostics": serde_json::Value::Object(extras),
        });
        write_json(&dir, "checks.json", &value).map_err(CmdError::Invalid)?;
    }
    if rows.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(CmdError::ChecksFailed)
    }
}

pub fn cmd_sweep(
    config: &RunConfig,
    out_flag: &Option<PathBuf>,
    format: Option<Format>,
    jobs: usize,
) -> Result<(), CmdError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CmdError::Invalid("sweep command needs a 'sweep' section".into()))?;
    let dir = out_dir(config, out_flag);
    let formats = effective_formats(config, format);

    let qs = sweep.q.values().ok_or_else(|| {
        CmdError::Invalid("q range cannot be derived; only p supports 'critical-hyperbola'".into())
    })?;
    let rs = sweep.r.values().ok_or_else(|| {
        CmdError::Invalid("r range cannot be derived; only p supports 'critical-hyperbola'".into())
    })?;
    let ss = sweep.s.values().ok_or_else(|| {
        CmdError::Invalid("s range cannot be derived; only p supports 'critical-hyperbola'".into())
    })?;
    let hyperbola = sweep.p.is_hyperbola();
    let ps = if hyperbola {
        Vec::new()
    } else {
        sweep.p.values().ok_or_else(|| {
            CmdError::Invalid(format!("unknown derived range for p: {:?}", sweep.p))
        })?
    };
    if sweep.n.is_empty() || qs.is_empty() || rs.is_empty() || ss.is_empty() || (!hyperbola && ps.is_empty()) {
        return Err(CmdError::Invalid("sweep has an empty range".into()));
    }

    // Cartesian product in declared order: n, p, q, r, s.
    let mut tuples: Vec<(u32, Option<f64>, f64, f64, f64)> = Vec::new();
    for &n in &sweep.n {
        let p_axis: Vec<Option<f64>> = if hyperbola {
            vec![None]
        } else {
            ps.iter().copied().map(Some).collect()
        };
        for &p in &p_axis {
            for &q in &qs {
                for &r in &rs {
                    for &s in &ss {
                        tuples.push((n, p, q, r, s));
                    }
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CmdError::Invalid(e.to_string()))?;
    let rows: Vec<String> = pool.install(|| {
        tuples
            .par_iter()
            .map(|&(n, p, q, r, s)| {
                let p = p.unwrap_or_else(|| crate::config::hyperbola_p(f64::from(n), q, r, s));
                match SystemParams::new(n, p, q, r, s) {
                    Ok(params) => {
                        let report = derive_scaling(&params);
                        scaling_row(&params, Some(&report), "")
                    }
                    Err(e) => {
                        let params = SystemParams { n, p, q, r, s };
                        scaling_row(&params, None, &e.to_string())
                    }
                }
            })
            .collect()
    });

    let mut csv = String::from(SCALING_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(row);
        csv.push('\n');
    }
    if formats.contains(&Format::Csv) {
        write_text(&dir, "sweep.csv", &csv).map_err(CmdError::Invalid)?;
    }
    if formats.contains(&Format::Json) {
        let reports: Vec<serde_json::Value> = tuples
            .iter()
            .map(|&(n, p, q, r, s)| {
                let p = p.unwrap_or_else(|| crate::config::hyperbola_p(f64::from(n), q, r, s));
                match SystemParams::new(n, p, q, r, s) {
                    Ok(params) => serde_json::to_value(derive_scaling(&params)).expect("serializable"),
                    Err(e) => json!({"n": n, "p": p, "q": q, "r": r, "s": s, "error": e.to_string()}),
                }
            })
            .collect();
        write_json(&dir, "sweep.json", &json!({ "rows": reports })).map_err(CmdError::Invalid)?;
    }
    println!("swept {} tuples -> {}", tuples.len(), dir.display());
    Ok(())
}

pub fn cmd_potential(
    field_stem: &Path,
    out_flag: &Option<PathBuf>,
) -> Result<(), CmdError> {
    let field = RadialField::load(field_stem).map_err(|e| CmdError::Invalid(e.to_string()))?;
    let w = newton_potential(&field).map_err(|e| CmdError::Invalid(e.to_string()))?;
    let dir = out_flag.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|e| CmdError::Invalid(e.to_string()))?;
    w.save(&dir.join("potential"))
        .map_err(|e| CmdError::Invalid(e.to_string()))?;
    match w.value_at_zero() {
        Some(w0) => println!("potential written; w(0) = {w0:.12e}, tail {:?}", w.tail()),
        None => println!("potential written; singular at the origin, tail {:?}", w.tail()),
    }
    Ok(())
}
