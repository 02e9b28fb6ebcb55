//! Ground states of `-Δu = v^p u^r`, `-Δv = u^q v^s` by shooting and by
//! damped Picard iteration on the Green representation.
//!
//! The radial system is integrated in the log-radius variable `t = ln ρ`,
//! where it reads `u_tt + (n-2) u_t + e^(2t) v^p u^r = 0` (and likewise for
//! `v`). The ODE is singular at `ρ = 0`, so integration starts from a
//! second-order series at `r_start` with `u(0) = α`, `v(0) = β`.
//!
//! With `α = 1` fixed by scale invariance, the ground state sits at the
//! boundary in `β` between trajectories whose `u` hits zero and trajectories
//! whose `v` hits zero; [`bisect_ground_state`] locates that boundary.

use std::cell::Cell;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{derive_scaling, require_admissible, RegimeError, ScalingReport, SystemParams};
use crate::field::{FieldError, OriginModel, RadialField, RadialGrid, TailModel};
use crate::greens::{newton_potential, radial_laplacian, GreensError};
use crate::ode::{integrate, DenseStep, OdeError, OdeOptions, StepOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("initial data must be positive: alpha = {alpha}, beta = {beta}")]
    DegenerateInitialData { alpha: f64, beta: f64 },
    #[error("bracket ends classify identically ({lo_class:?} at {lo}, {hi_class:?} at {hi})")]
    BracketFailure {
        lo: f64,
        hi: f64,
        lo_class: TrajectoryClass,
        hi_class: TrajectoryClass,
    },
    #[error("no decaying trajectory found; final beta interval [{lo}, {hi}]: {message}")]
    NonConvergence { lo: f64, hi: f64, message: String },
    #[error("Picard iteration diverged after {iterations} iterations (last change {change})")]
    PicardDiverged { iterations: usize, change: f64 },
    #[error("integrator failure: {0}")]
    Integrator(#[from] OdeError),
    #[error("{component} Green-identity residual {value} exceeds the {limit} contract")]
    ResidualExceeded {
        component: &'static str,
        value: f64,
        limit: f64,
    },
    #[error("solved field lost positivity at node {index}")]
    LostPositivity { index: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("rescale factor must be positive, got {0}")]
    BadRescaleFactor(f64),
    #[error(transparent)]
    Regime(#[from] RegimeError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Greens(#[from] GreensError),
}

/// Shooting parameters. All fields have scale-free defaults; the bracket is
/// symmetric in log around `β = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootingConfig {
    /// Radius where the origin series hands over to the integrator.
    pub r_start: f64,
    /// Integration horizon.
    pub r_max: f64,
    /// Relative tolerance of the adaptive integrator.
    pub ode_tol: f64,
    /// Initial interval for `v(0)`.
    pub beta_bracket: (f64, f64),
    pub max_bisections: u32,
    /// Zero-crossing refinement tolerance in `t = ln ρ`.
    pub event_tol: f64,
    /// `ρ^(n-2) u` beyond this value classifies the trajectory NonDecaying.
    pub divergence_threshold: f64,
    /// Bisection stops once the bracket is this small relative to `β`.
    pub beta_window_rel: f64,
    /// Accepted relative mismatch between fitted tail slopes and the
    /// theoretical decay profile.
    pub slope_tol: f64,
    /// A trajectory only counts as decaying if its slopes track the profile
    /// out to at least this radius.
    pub clean_radius_min: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            r_start: 1e-6,
            r_max: 1e6,
            ode_tol: 1e-10,
            beta_bracket: (1e-3, 1e3),
            max_bisections: 80,
            event_tol: 1e-12,
            divergence_threshold: 1e5,
            beta_window_rel: 1e-13,
            slope_tol: 0.10,
            clean_radius_min: 1e3,
        }
    }
}

impl ShootingConfig {
    fn validate(&self, grid: &RadialGrid) -> Result<(), SolverError> {
        if !(self.r_start > 0.0 && self.r_start < 1.0 && self.r_max >= 1.0) {
            return Err(SolverError::InvalidConfig(format!(
                "need 0 < r_start << 1 <= r_max, got r_start = {}, r_max = {}",
                self.r_start, self.r_max
            )));
        }
        if self.ode_tol <= 0.0 || self.event_tol <= 0.0 {
            return Err(SolverError::InvalidConfig(
                "tolerances must be positive".into(),
            ));
        }
        if !(self.beta_bracket.0 > 0.0 && self.beta_bracket.1 > self.beta_bracket.0) {
            return Err(SolverError::InvalidConfig(format!(
                "beta bracket [{}, {}] is empty or not positive",
                self.beta_bracket.0, self.beta_bracket.1
            )));
        }
        if grid.rho_min() <= self.r_start {
            return Err(SolverError::InvalidConfig(format!(
                "grid rho_min {} must exceed r_start {}",
                grid.rho_min(),
                self.r_start
            )));
        }
        Ok(())
    }
}

/// Outcome classes of a single shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryClass {
    UHitsZero,
    VHitsZero,
    NonDecaying,
    Decaying,
}

/// Raw outcome of one integration.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub class: TrajectoryClass,
    /// Radius of the first zero crossing; set iff the class is
    /// `UHitsZero`/`VHitsZero`.
    pub event_radius: Option<f64>,
    /// `(u, v)` sampled on the grid nodes, filled up to `filled`.
    pub u_values: Vec<f64>,
    pub v_values: Vec<f64>,
    pub filled: usize,
    /// Negative intermediate values clamped before fractional powering.
    pub clamp_count: u64,
    /// Fitted tail slopes at the clean radius (only when no event occurred).
    pub u_slope: Option<f64>,
    pub v_slope: Option<f64>,
    /// Largest radius where the trailing-window slopes still match the
    /// theoretical profiles: beyond it the trajectory is dominated by the
    /// finite resolution of the shooting parameter.
    pub clean_radius: Option<f64>,
    /// Relative drift of `ρ^(n-2) u` between the clean radius and the
    /// horizon: positive means `u` is holding mass (the `v`-weak side of
    /// the dichotomy), negative means `u` is heading toward a crossing.
    pub far_drift: Option<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SolveMethod {
    Shooting,
    Picard,
}

/// Residual diagnostics of an accepted state.
///
/// The ODE residuals are sup-norms of the finite-difference defect relative
/// to the source term plus its rounding floor (`eps·|u|/(h²ρ²)`), which is
/// what the stencil can resolve at the far field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    pub ode_sup_u: f64,
    pub ode_sup_v: f64,
    pub green_rel_u: f64,
    pub green_rel_v: f64,
}

/// Green-identity acceptance threshold for solved states.
pub const GREEN_RESIDUAL_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BetaProbe {
    pub beta: f64,
    pub class: TrajectoryClass,
    pub event_radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct SolveDiagnostics {
    pub bisection_history: Vec<BetaProbe>,
    /// Final bracket around `β*`.
    pub beta_window: Option<(f64, f64)>,
    pub clamp_count: u64,
    pub picard_iterations: Option<usize>,
    pub picard_final_change: Option<f64>,
}

/// A solved positive decaying pair with `u(0) = 1`.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub params: SystemParams,
    pub scaling: ScalingReport,
    pub u: RadialField,
    pub v: RadialField,
    pub beta_star: f64,
    pub residuals: Residuals,
    pub method: SolveMethod,
    pub diagnostics: SolveDiagnostics,
}

fn pw(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        x
    } else {
        x.powf(e)
    }
}

/// `x^ex · y^ey` as fields, skipping zero exponents.
pub(crate) fn powered_product(
    x: &RadialField,
    ex: f64,
    y: &RadialField,
    ey: f64,
) -> Result<RadialField, FieldError> {
    debug_assert!(ex > 0.0, "the first factor always carries p or q >= 1");
    let lhs = x.powf(ex)?;
    if ey == 0.0 {
        Ok(lhs)
    } else {
        lhs.mul(&y.powf(ey)?)
    }
}

/// Integrates one shot and classifies it. When `grid` is given, the
/// trajectory is also sampled onto the grid nodes (dense output).
pub fn integrate_radial(
    params: &SystemParams,
    alpha: f64,
    beta: f64,
    config: &ShootingConfig,
    grid: Option<&Arc<RadialGrid>>,
) -> Result<Trajectory, SolverError> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(SolverError::DegenerateInitialData { alpha, beta });
    }
    let scaling = derive_scaling(params);
    require_admissible(&scaling)?;

    let n = params.dim();
    let (p, q, r, s) = (params.p, params.q, params.r, params.s);
    let cu = pw(beta, p) * pw(alpha, r) / (2.0 * n);
    let cv = pw(alpha, q) * pw(beta, s) / (2.0 * n);
    let rho0 = config.r_start;

    // Series initial data; if the quadratic term already dominates, the
    // crossing happens below r_start and the class is decided by the series.
    let u0 = alpha - cu * rho0 * rho0;
    let v0 = beta - cv * rho0 * rho0;
    if u0 <= 0.0 || v0 <= 0.0 {
        let t_u = if cu > 0.0 { (alpha / cu).sqrt() } else { f64::INFINITY };
        let t_v = if cv > 0.0 { (beta / cv).sqrt() } else { f64::INFINITY };
        let (class, radius) = if t_u <= t_v {
            (TrajectoryClass::UHitsZero, t_u)
        } else {
            (TrajectoryClass::VHitsZero, t_v)
        };
        return Ok(Trajectory {
            class,
            event_radius: Some(radius),
            u_values: Vec::new(),
            v_values: Vec::new(),
            filled: 0,
            clamp_count: 0,
            u_slope: None,
            v_slope: None,
            clean_radius: None,
            far_drift: None,
            steps: 0,
        });
    }

    let t0 = rho0.ln();
    let t_end = grid
        .map(|g| g.rho_max())
        .unwrap_or(config.r_max)
        .max(config.r_max)
        .ln();

    let clamps = Cell::new(0u64);
    let mut rhs = |t: f64, y: &[f64; 4]| -> [f64; 4] {
        let e2t = (2.0 * t).exp();
        let mut uc = y[0];
        let mut vc = y[2];
        if uc < 0.0 {
            uc = 0.0;
            clamps.set(clamps.get() + 1);
        }
        if vc < 0.0 {
            vc = 0.0;
            clamps.set(clamps.get() + 1);
        }
        let fu = pw(vc, p) * pw(uc, r);
        let fv = pw(uc, q) * pw(vc, s);
        [
            y[1],
            -(n - 2.0) * y[1] - e2t * fu,
            y[3],
            -(n - 2.0) * y[3] - e2t * fv,
        ]
    };

    // u_t = ρ u' at the series start.
    let y0 = [
        u0,
        -2.0 * cu * rho0 * rho0,
        v0,
        -2.0 * cv * rho0 * rho0,
    ];
    let opts = OdeOptions {
        rtol: config.ode_tol,
        atol: 1e-14,
        ..OdeOptions::default()
    };

    let node_ts: Vec<f64> = grid
        .map(|g| g.nodes().iter().map(|&r| r.ln()).collect())
        .unwrap_or_default();
    let node_count = node_ts.len();
    let mut u_values = vec![0.0; node_count];
    let mut v_values = vec![0.0; node_count];
    let mut next_node = 0usize;

    let mut checkpoints: Vec<(f64, f64, f64)> = Vec::new();
    let mut event: Option<(TrajectoryClass, f64)> = None;
    let mut diverged = false;

    let end = integrate(&mut rhs, t0, t_end, y0, &opts, |step| {
        // Sign changes: components are positive at step start.
        let mut crossing: Option<(usize, f64)> = None;
        for comp in [0usize, 2] {
            if let Some(t_hit) = first_zero(step, comp, config.event_tol) {
                if crossing.is_none_or(|(_, t)| t_hit < t) {
                    crossing = Some((comp, t_hit));
                }
            }
        }
        if let Some((comp, t_hit)) = crossing {
            // Fill nodes strictly before the event.
            while next_node < node_count && node_ts[next_node] <= t_hit.min(step.t1) {
                let y = step.eval(node_ts[next_node].min(step.t1).max(step.t0));
                u_values[next_node] = y[0];
                v_values[next_node] = y[2];
                next_node += 1;
            }
            let class = if comp == 0 {
                TrajectoryClass::UHitsZero
            } else {
                TrajectoryClass::VHitsZero
            };
            event = Some((class, t_hit.exp()));
            return StepOutcome::Stop;
        }

        while next_node < node_count && node_ts[next_node] <= step.t1 {
            let t = node_ts[next_node].max(step.t0);
            let y = step.eval(t);
            u_values[next_node] = y[0];
            v_values[next_node] = y[2];
            next_node += 1;
        }

        let y1 = step.y1();
        checkpoints.push((step.t1, y1[0], y1[2]));
        if ((n - 2.0) * step.t1).exp() * y1[0] > config.divergence_threshold {
            diverged = true;
            return StepOutcome::Stop;
        }
        StepOutcome::Continue
    })?;

    let filled = next_node;
    if let Some((class, radius)) = event {
        return Ok(Trajectory {
            class,
            event_radius: Some(radius),
            u_values,
            v_values,
            filled,
            clamp_count: clamps.get(),
            u_slope: None,
            v_slope: None,
            clean_radius: None,
            far_drift: None,
            steps: end.steps,
        });
    }
    if diverged {
        return Ok(Trajectory {
            class: TrajectoryClass::NonDecaying,
            event_radius: None,
            u_values,
            v_values,
            filled,
            clamp_count: clamps.get(),
            u_slope: None,
            v_slope: None,
            clean_radius: None,
            far_drift: None,
            steps: end.steps,
        });
    }

    // Both components stayed positive. The finite resolution of β means the
    // trajectory eventually drifts off the connecting orbit, so locate the
    // largest radius whose trailing half-decade slopes still match the
    // profiles; the shot is decaying if that clean radius is deep enough.
    let v_kappa = scaling.v_profile.log_power;
    let window = 0.5 * std::f64::consts::LN_10;
    let mut clean_radius = None;
    let mut u_slope = None;
    let mut v_slope = None;
    let earliest = checkpoints.first().map(|c| c.0).unwrap_or(t0) + window;
    let stride = (checkpoints.len() / 400).max(1);
    let mut idx = checkpoints.len().saturating_sub(1);
    loop {
        let t_hi = checkpoints[idx].0;
        if t_hi < earliest || t_hi.exp() < config.clean_radius_min {
            break;
        }
        let start = checkpoints.partition_point(|c| c.0 < t_hi - window);
        let mu = fit_checkpoint_slope(&checkpoints[start..=idx], 1, 0.0);
        let mv = fit_checkpoint_slope(&checkpoints[start..=idx], 2, v_kappa);
        let u_ok = mu.is_some_and(|m| {
            (m / scaling.u_profile.exponent - 1.0).abs() <= config.slope_tol
        });
        let v_ok = mv.is_some_and(|m| {
            (m / scaling.v_profile.exponent - 1.0).abs() <= config.slope_tol
        });
        if u_ok && v_ok {
            clean_radius = Some(t_hi.exp());
            u_slope = mu;
            v_slope = mv;
            break;
        }
        if idx < stride {
            break;
        }
        idx -= stride;
    }

    let class = if clean_radius.is_some_and(|r| r >= config.clean_radius_min) {
        TrajectoryClass::Decaying
    } else {
        TrajectoryClass::NonDecaying
    };

    // Drift of ρ^(n-2)u past the clean radius, used by the bisection to pick
    // a side when the trajectory still looks decaying.
    let far_drift = clean_radius.and_then(|rc| {
        let t_clean = rc.ln();
        let at_clean = checkpoints
            .iter()
            .find(|c| c.0 >= t_clean)
            .map(|&(t, u, _)| ((n - 2.0) * t).exp() * u)?;
        let last = checkpoints.last()?;
        let at_end = ((n - 2.0) * last.0).exp() * last.1;
        Some(at_end / at_clean - 1.0)
    });

    Ok(Trajectory {
        class,
        event_radius: None,
        u_values,
        v_values,
        filled,
        clamp_count: clamps.get(),
        u_slope,
        v_slope,
        clean_radius,
        far_drift,
        steps: end.steps,
    })
}

/// First `t` in the step where component `comp` reaches zero, refined by
/// bisection on the dense output to `event_tol`.
fn first_zero(step: &DenseStep<4>, comp: usize, event_tol: f64) -> Option<f64> {
    let samples = 8;
    let mut t_prev = step.t0;
    for j in 1..=samples {
        let t = step.t0 + (step.t1 - step.t0) * j as f64 / samples as f64;
        if step.eval(t)[comp] <= 0.0 {
            let (mut lo, mut hi) = (t_prev, t);
            while hi - lo > event_tol {
                let mid = 0.5 * (lo + hi);
                if step.eval(mid)[comp] > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        t_prev = t;
    }
    None
}

/// Least-squares slope `m` of `ln f - κ ln ln ρ ~ c - m t` over the given
/// checkpoint window.
fn fit_checkpoint_slope(checkpoints: &[(f64, f64, f64)], comp: usize, kappa: f64) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(t, u, v) in checkpoints {
        if t <= 0.0 {
            continue;
        }
        let value = if comp == 1 { u } else { v };
        if value <= 0.0 {
            return None;
        }
        xs.push(t);
        ys.push(value.ln() - kappa * t.ln());
    }
    if xs.len() < 8 {
        return None;
    }
    let nf = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / nf;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    Some(-(sxy / sxx))
}

/// Fits the tail amplitude over `[hi/10, hi]`, holding the profile exponent
/// and log power fixed.
fn fit_tail_amplitude(grid: &RadialGrid, values: &[f64], hi: f64, m: f64, kappa: f64) -> f64 {
    let lo = hi / 10.0;
    let mut acc = 0.0;
    let mut count = 0usize;
    for (&rho, &value) in grid.nodes().iter().zip(values) {
        if rho < lo || rho > hi || value <= 0.0 {
            continue;
        }
        let mut ln_a = value.ln() + m * rho.ln();
        if kappa != 0.0 {
            ln_a -= kappa * rho.ln().ln();
        }
        acc += ln_a;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        (acc / count as f64).exp()
    }
}

/// Builds the solved fields from a decaying trajectory.
///
/// The shooting parameter carries at best ~1e-13 relative resolution, so the
/// trajectory drifts off the connecting orbit beyond its clean radius, and
/// the drift mode grows like ρ^(n-2) relative to `u`: a 10% slope mismatch
/// at the clean radius means percent-level value contamination there. Node
/// values are therefore kept from the trajectory only up to 2.5 decades
/// inside the clean radius; the far field is regenerated by a few passes of
/// the Green map, which rebuilds it from the (β-insensitive) bulk mass
/// integrals and sets the tail models in closed form. The Green-identity
/// contract then validates the splice.
fn assemble_fields(
    params: &SystemParams,
    scaling: &ScalingReport,
    grid: &Arc<RadialGrid>,
    u_values: Vec<f64>,
    v_values: Vec<f64>,
    beta_star: f64,
    clean_radius: f64,
) -> Result<(RadialField, RadialField), SolverError> {
    let junction = (clean_radius / 316.23).max(grid.rho_min() * 100.0);
    let mut u = RadialField::new(
        grid.clone(),
        u_values,
        OriginModel::Quadratic { value: 1.0 },
        TailModel::zero(),
    )?;
    let mut v = RadialField::new(
        grid.clone(),
        v_values,
        OriginModel::Quadratic { value: beta_star },
        TailModel::zero(),
    )?;
    // Seed the far field with the profile extension fitted on the clean
    // window, then let the Green map take over.
    let u_amp = fit_tail_amplitude(grid, u.values(), junction, scaling.u_profile.exponent, 0.0);
    let v_amp = fit_tail_amplitude(
        grid,
        v.values(),
        junction,
        scaling.v_profile.exponent,
        scaling.v_profile.log_power,
    );
    let u_profile = TailModel::new(u_amp, scaling.u_profile.exponent, 0.0)?;
    let v_profile = TailModel::new(
        v_amp,
        scaling.v_profile.exponent,
        scaling.v_profile.log_power,
    )?;
    splice_extension(&mut u, junction, |rho| u_profile.eval(rho), u_profile);
    splice_extension(&mut v, junction, |rho| v_profile.eval(rho), v_profile);

    for _ in 0..4 {
        let f_u = powered_product(&v, params.p, &u, params.r)?;
        let f_v = powered_product(&u, params.q, &v, params.s)?;
        let w_u = newton_potential(&f_u)?;
        let w_v = newton_potential(&f_v)?;
        splice_extension(&mut u, junction, |rho| w_u.eval(rho), w_u.tail());
        splice_extension(&mut v, junction, |rho| w_v.eval(rho), w_v.tail());
    }

    Ok((u.declare_nonnegative()?, v.declare_nonnegative()?))
}

/// Replaces the values beyond `junction` and the tail model.
fn splice_extension(
    field: &mut RadialField,
    junction: f64,
    extension: impl Fn(f64) -> f64,
    tail: TailModel,
) {
    let nodes: Vec<f64> = field.grid().nodes().to_vec();
    let mut values = field.values().to_vec();
    for (value, &rho) in values.iter_mut().zip(&nodes) {
        if rho > junction {
            *value = extension(rho);
        }
    }
    let origin = field.origin();
    let grid = field.grid().clone();
    *field = RadialField::new(grid, values, origin, tail).expect("spliced field stays valid");
}

/// Builds the residual record via the Green map and the discrete Laplacian.
pub fn compute_residuals(
    params: &SystemParams,
    u: &RadialField,
    v: &RadialField,
) -> Result<Residuals, SolverError> {
    let f_u = powered_product(v, params.p, u, params.r)?;
    let f_v = powered_product(u, params.q, v, params.s)?;
    let green_u = newton_potential(&f_u)?;
    let green_v = newton_potential(&f_v)?;

    let rel_sup = |field: &RadialField, green: &RadialField| -> f64 {
        field
            .values()
            .iter()
            .zip(green.values())
            .map(|(&a, &b)| (a - b).abs() / a.abs().max(1e-300))
            .fold(0.0, f64::max)
    };
    let green_rel_u = rel_sup(u, &green_u);
    let green_rel_v = rel_sup(v, &green_v);

    // Sup of the interior finite-difference defect, weighted by the sup of
    // the source: pointwise quotients are meaningless where the source
    // sinks below the stencil's rounding floor.
    let ode_sup = |field: &RadialField, source: &RadialField| -> Result<f64, SolverError> {
        let lap = radial_laplacian(field)?;
        let grid = field.grid();
        let scale = source
            .values()
            .iter()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()))
            .max(1e-300);
        let mut sup: f64 = 0.0;
        for i in 1..grid.len() - 1 {
            sup = sup.max((lap.values()[i] - source.values()[i]).abs());
        }
        Ok(sup / scale)
    };
    Ok(Residuals {
        ode_sup_u: ode_sup(u, &f_u)?,
        ode_sup_v: ode_sup(v, &f_v)?,
        green_rel_u,
        green_rel_v,
    })
}

fn enforce_contract(state: &GroundState) -> Result<(), SolverError> {
    for (index, &value) in state.u.values().iter().enumerate() {
        if value <= 0.0 {
            return Err(SolverError::LostPositivity { index });
        }
    }
    for (index, &value) in state.v.values().iter().enumerate() {
        if value <= 0.0 {
            return Err(SolverError::LostPositivity { index });
        }
    }
    if state.residuals.green_rel_u > GREEN_RESIDUAL_LIMIT {
        return Err(SolverError::ResidualExceeded {
            component: "u",
            value: state.residuals.green_rel_u,
            limit: GREEN_RESIDUAL_LIMIT,
        });
    }
    if state.residuals.green_rel_v > GREEN_RESIDUAL_LIMIT {
        return Err(SolverError::ResidualExceeded {
            component: "v",
            value: state.residuals.green_rel_v,
            limit: GREEN_RESIDUAL_LIMIT,
        });
    }
    Ok(())
}

/// Locates `β* = v(0)` with `u(0) = 1` by bisecting on the trajectory-class
/// dichotomy, then assembles the solved state from the accepted trajectory.
///
/// Bracket ends must classify as `UHitsZero` and `VHitsZero` (one each);
/// otherwise [`SolverError::BracketFailure`] asks the caller to widen.
/// If the bracket collapses without producing a trajectory that passes the
/// slope test, the midpoint is rejected with [`SolverError::NonConvergence`].
pub fn bisect_ground_state(
    params: &SystemParams,
    config: &ShootingConfig,
    grid: &Arc<RadialGrid>,
) -> Result<GroundState, SolverError> {
    let scaling = derive_scaling(params);
    require_admissible(&scaling)?;
    config.validate(grid)?;
    if grid.dim() != params.n {
        return Err(SolverError::InvalidConfig(format!(
            "grid dimension {} does not match params n = {}",
            grid.dim(),
            params.n
        )));
    }

    let mut history = Vec::new();
    let mut probe = |beta: f64| -> Result<(TrajectoryClass, Option<f64>), SolverError> {
        let shot = integrate_radial(params, 1.0, beta, config, None)?;
        history.push(BetaProbe {
            beta,
            class: shot.class,
            event_radius: shot.event_radius,
        });
        Ok((shot.class, shot.far_drift))
    };

    let (mut lo, mut hi) = config.beta_bracket;
    let (lo_class, _) = probe(lo)?;
    let (hi_class, _) = probe(hi)?;
    let valid = matches!(
        (lo_class, hi_class),
        (TrajectoryClass::UHitsZero, TrajectoryClass::VHitsZero)
            | (TrajectoryClass::VHitsZero, TrajectoryClass::UHitsZero)
    );
    if !valid {
        return Err(SolverError::BracketFailure {
            lo,
            hi,
            lo_class,
            hi_class,
        });
    }
    let u_side_is_lo = lo_class == TrajectoryClass::UHitsZero;

    // Drifts smaller than this cannot pick a side; the midpoint is accepted.
    const DRIFT_MARGIN: f64 = 0.02;

    let mut beta_star = None;
    for _ in 0..config.max_bisections {
        if (hi - lo) <= config.beta_window_rel * (lo * hi).sqrt() {
            break;
        }
        let mid = (lo * hi).sqrt();
        let (class, drift) = probe(mid)?;
        // A decaying midpoint still drifts off the orbit past its clean
        // radius; the drift direction keeps the bisection sharpening β*.
        let u_side = match class {
            TrajectoryClass::UHitsZero => true,
            TrajectoryClass::VHitsZero | TrajectoryClass::NonDecaying => false,
            TrajectoryClass::Decaying => match drift {
                Some(d) if d < -DRIFT_MARGIN => true,
                Some(d) if d > DRIFT_MARGIN => false,
                _ => {
                    beta_star = Some(mid);
                    break;
                }
            },
        };
        if u_side == u_side_is_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // The decaying window is narrower than the β resolution: accept the
    // midpoint and let the slope test below arbitrate.
    let beta_star = beta_star.unwrap_or_else(|| (lo * hi).sqrt());

    let shot = integrate_radial(params, 1.0, beta_star, config, Some(grid))?;
    if shot.class != TrajectoryClass::Decaying {
        return Err(SolverError::NonConvergence {
            lo,
            hi,
            message: format!(
                "midpoint trajectory classified {:?} (u slope {:?}, v slope {:?}, clean radius {:?})",
                shot.class, shot.u_slope, shot.v_slope, shot.clean_radius
            ),
        });
    }
    let clean_radius = shot.clean_radius.expect("decaying shots carry a clean radius");

    let (u, v) = assemble_fields(
        params,
        &scaling,
        grid,
        shot.u_values,
        shot.v_values,
        beta_star,
        clean_radius,
    )?;
    let residuals = compute_residuals(params, &u, &v)?;
    let state = GroundState {
        params: *params,
        scaling,
        u,
        v,
        beta_star,
        residuals,
        method: SolveMethod::Shooting,
        diagnostics: SolveDiagnostics {
            bisection_history: history,
            beta_window: Some((lo, hi)),
            clamp_count: shot.clamp_count,
            picard_iterations: None,
            picard_final_change: None,
        },
    };
    enforce_contract(&state)?;
    Ok(state)
}

/// Relative change threshold at which the Picard iteration stops.
pub const PICARD_CHANGE_TOL: f64 = 1e-8;

/// Conventional default damping for [`picard_solve`].
pub const PICARD_DEFAULT_DAMPING: f64 = 0.5;

/// Damped fixed-point iteration on `u = Γ∗(v^p u^r)`, `v = Γ∗(u^q v^s)`,
/// renormalized to `u(0) = 1` through the scale invariance after every
/// sweep. Divergence (relative change growing for 10 consecutive
/// iterations) is reported as an error, not a panic.
pub fn picard_solve(
    params: &SystemParams,
    initial: &GroundState,
    damping: f64,
    max_iters: usize,
) -> Result<GroundState, SolverError> {
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(SolverError::InvalidConfig(format!(
            "damping must lie in (0, 1], got {damping}"
        )));
    }
    let scaling = derive_scaling(params);
    require_admissible(&scaling)?;
    let n = params.dim();

    let mut u = initial.u.clone();
    let mut v = initial.v.clone();
    if u.values().iter().any(|&x| x <= 0.0) || v.values().iter().any(|&x| x <= 0.0) {
        return Err(SolverError::LostPositivity { index: 0 });
    }

    let mut prev_change = f64::INFINITY;
    let mut growth_streak = 0u32;
    let mut iterations = 0usize;
    let mut change = f64::INFINITY;
    let (p, q, r, s) = (params.p, params.q, params.r, params.s);

    while iterations < max_iters {
        iterations += 1;
        let f_u = powered_product(&v, p, &u, r)?;
        let f_v = powered_product(&u, q, &v, s)?;
        let t_u = newton_potential(&f_u)?;
        let t_v = newton_potential(&f_v)?;

        // The plain damped sweep is linearly unstable: the amplitude pair
        // (c·u, d·v) feeds back through the nonlinearity with multiplier
        // ~ p·q, and the u(0)-renormalization only removes the scaling-orbit
        // direction. Rebalance the amplitudes exactly first — the 2x2
        // log-linear system c^(1-r) d^(-p) = T_u(0)/u(0),
        // d^(1-s) c^(-q) = T_v(0)/v(0) — reusing the computed potentials;
        // the damped update then only has to contract shape modes.
        let u0 = u.value_at_zero().filter(|x| *x > 0.0);
        let v0 = v.value_at_zero().filter(|x| *x > 0.0);
        let tu0 = t_u.value_at_zero().filter(|x| *x > 0.0);
        let tv0 = t_v.value_at_zero().filter(|x| *x > 0.0);
        let (u0, v0, tu0, tv0) = match (u0, v0, tu0, tv0) {
            (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
            _ => return Err(SolverError::PicardDiverged { iterations, change }),
        };
        let ln_ku = (tu0 / u0).ln();
        let ln_kv = (tv0 / v0).ln();
        let det = (1.0 - r) * (1.0 - s) - p * q;
        let ln_c = ((1.0 - s) * ln_ku + p * ln_kv) / det;
        let ln_d = (q * ln_ku + (1.0 - r) * ln_kv) / det;
        if !(ln_c.is_finite() && ln_d.is_finite()) {
            return Err(SolverError::PicardDiverged { iterations, change });
        }
        let c = ln_c.exp();
        let d = ln_d.exp();

        // Γ∗((d v)^p (c u)^r) = d^p c^r T_u, so the rebalanced damped sweep
        // reuses the potentials.
        let u_next = u.linear_combination(
            c * (1.0 - damping),
            &t_u,
            damping * (p * ln_d + r * ln_c).exp(),
        )?;
        let v_next = v.linear_combination(
            d * (1.0 - damping),
            &t_v,
            damping * (q * ln_c + s * ln_d).exp(),
        )?;

        let u0 = u_next
            .value_at_zero()
            .filter(|x| *x > 0.0 && x.is_finite())
            .ok_or(SolverError::PicardDiverged { iterations, change })?;
        let mu = u0.powf(-scaling.a / n);
        let u_new = rescale_field(&u_next, mu, n / scaling.a)?;
        let v_new = rescale_field(&v_next, mu, n / scaling.b)?;

        change = relative_change(&u, &u_new).max(relative_change(&v, &v_new));
        if std::env::var_os("GROUNDSTATE_TRACE_PICARD").is_some() {
            eprintln!("picard iter {iterations}: change {change:e} (c {c:e}, d {d:e})");
        }
        u = u_new;
        v = v_new;

        if change <= PICARD_CHANGE_TOL {
            break;
        }
        if !change.is_finite() {
            return Err(SolverError::PicardDiverged { iterations, change });
        }
        if change > prev_change {
            growth_streak += 1;
            if growth_streak >= 10 {
                return Err(SolverError::PicardDiverged { iterations, change });
            }
        } else {
            growth_streak = 0;
        }
        prev_change = change;
    }

    let u = u.declare_nonnegative()?;
    let v = v.declare_nonnegative()?;
    let beta_star = v.value_at_zero().unwrap_or(f64::NAN);
    let residuals = compute_residuals(params, &u, &v)?;
    let state = GroundState {
        params: *params,
        scaling,
        u,
        v,
        beta_star,
        residuals,
        method: SolveMethod::Picard,
        diagnostics: SolveDiagnostics {
            bisection_history: initial.diagnostics.bisection_history.clone(),
            beta_window: initial.diagnostics.beta_window,
            clamp_count: initial.diagnostics.clamp_count,
            picard_iterations: Some(iterations),
            picard_final_change: Some(change),
        },
    };
    enforce_contract(&state)?;
    Ok(state)
}

fn relative_change(old: &RadialField, new: &RadialField) -> f64 {
    old.values()
        .iter()
        .zip(new.values())
        .map(|(&a, &b)| (a - b).abs() / a.abs().max(1e-300))
        .fold(0.0, f64::max)
}

/// `μ^w f(μρ)` on the same grid: values are re-interpolated, the tail
/// amplitude picks up `μ^(w-γ)`, and the log correction keeps its power
/// (the `ln μ` shift is asymptotically negligible).
fn rescale_field(field: &RadialField, mu: f64, weight: f64) -> Result<RadialField, SolverError> {
    let scale = mu.powf(weight);
    let values = field
        .grid()
        .nodes()
        .iter()
        .map(|&rho| scale * field.eval_smooth(mu * rho))
        .collect();
    let origin = match field.origin() {
        OriginModel::Quadratic { value } => OriginModel::Quadratic {
            value: scale * value,
        },
        OriginModel::SingularPower => OriginModel::SingularPower,
    };
    let tail = field.tail();
    let tail = TailModel::new(
        tail.amplitude * mu.powf(weight - tail.exponent),
        tail.exponent,
        tail.log_power,
    )?;
    Ok(RadialField::new(
        field.grid().clone(),
        values,
        origin,
        tail,
    )?)
}

/// Applies the scale transformation
/// `(u, v) -> (μ^(n/a) u(μ·), μ^(n/b) v(μ·))` to a solved state and
/// recomputes its residual diagnostics.
pub fn rescale(state: &GroundState, mu: f64) -> Result<GroundState, SolverError> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(SolverError::BadRescaleFactor(mu));
    }
    let n = state.params.dim();
    let u = rescale_field(&state.u, mu, n / state.scaling.a)?.declare_nonnegative()?;
    let v = rescale_field(&state.v, mu, n / state.scaling.b)?.declare_nonnegative()?;
    let beta_star = v.value_at_zero().unwrap_or(f64::NAN);
    let residuals = compute_residuals(&state.params, &u, &v)?;
    Ok(GroundState {
        params: state.params,
        scaling: state.scaling.clone(),
        u,
        v,
        beta_star,
        residuals,
        method: state.method,
        diagnostics: state.diagnostics.clone(),
    })
}

/// Widens a failed bracket geometrically (both directions, factor 10) and
/// retries, at most `attempts` times.
pub fn bisect_with_widening(
    params: &SystemParams,
    config: &ShootingConfig,
    grid: &Arc<RadialGrid>,
    attempts: u32,
) -> Result<GroundState, SolverError> {
    let mut cfg = *config;
    let mut last_err = None;
    for _ in 0..=attempts {
        match bisect_ground_state(params, &cfg, grid) {
            Err(SolverError::BracketFailure {
                lo,
                hi,
                lo_class,
                hi_class,
            }) => {
                last_err = Some(SolverError::BracketFailure {
                    lo,
                    hi,
                    lo_class,
                    hi_class,
                });
                cfg.beta_bracket = (cfg.beta_bracket.0 / 10.0, cfg.beta_bracket.1 * 10.0);
            }
            other => return other,
        }
    }
    Err(last_err.expect("at least one attempt ran"))
}
